#pragma once

#include "maxem/data.hpp"
#include "maxem/models.hpp"

#include <vector>

namespace maxem {

/// Left-to-right segment chain: R_1 = 1, R_n = K, R_i in {R_{i-1}, R_{i-1}+1}.
///
/// Every step carries the same log transition log(1/2), so all feasible label
/// paths have equal prior mass and the MAP path depends on emissions only.
struct ChainSpec {
  Index n = 0;
  Index segments = 1;
  double log_transition = -0.69314718055994530942;  // log(1/2)

  /// 0-based position i, 0-based state k.
  bool feasible(Index i, Index k) const { return k <= i && (segments - 1 - k) <= (n - 1 - i); }
};

/// Log-space forward/backward lattice (sum or max variant). Infeasible cells
/// hold -inf. The scale vectors are the row maxima of each lattice.
struct LatticeScores {
  Eigen::MatrixXd log_forward;   // n x K
  Eigen::MatrixXd log_backward;  // n x K
  Eigen::VectorXd forward_scale;
  Eigen::VectorXd backward_scale;

  Index length() const { return log_forward.rows(); }
  Index segments() const { return log_forward.cols(); }
};

struct PosteriorWeights {
  LatticeScores lattice;
  Eigen::MatrixXd weights;  // omega_i(k), rows sum to 1
  double log_evidence = 0;  // log P(X_{1:n}, R_n = K), transitions included
};

/// n x K matrix of log e_i(k; theta_k).
Eigen::MatrixXd emission_matrix(const Dataset& data, const EmissionModel& model,
                                const std::vector<Eigen::VectorXd>& thetas);

PosteriorWeights forward_backward(const Eigen::MatrixXd& log_emissions);
PosteriorWeights forward_backward(const Dataset& data, const EmissionModel& model,
                                  const std::vector<Eigen::VectorXd>& thetas);

/// logF + logB at (i, k) is the best complete-data log-likelihood over paths
/// through (i, k), including the constant transition term.
LatticeScores max_forward_backward(const Eigen::MatrixXd& log_emissions);
LatticeScores max_forward_backward(const Dataset& data, const EmissionModel& model,
                                   const std::vector<Eigen::VectorXd>& thetas);

struct DecodeResult {
  Segmentation segmentation;
  bool used_backtrack = false;
};

/// Per-position argmax of logF + logB (ties go to the larger state, which
/// picks the earliest breakpoints). If the labels break the chain constraint
/// the single best path is recovered by backtracking logF instead.
DecodeResult map_decode_detailed(const LatticeScores& lattice);
Segmentation map_decode(const LatticeScores& lattice);

/// Single best path by backtracking the max-forward lattice; ties stay in the
/// current segment.
Segmentation viterbi_backtrack(const LatticeScores& lattice);

}  // namespace maxem
