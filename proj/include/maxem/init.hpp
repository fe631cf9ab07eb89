#pragma once

#include "maxem/maxem.hpp"

#include <string>
#include <vector>

namespace maxem {

enum class PoolSource { BinarySegmentation, FusedLasso, Given };

std::string to_string(PoolSource source);

/// Candidate breakpoints, strictly increasing within 1..n-1. provenance[j] is
/// the recursion depth (binary segmentation) or the penalty level (fused lasso)
/// at which candidates[j] was found.
struct CandidatePool {
  PoolSource source = PoolSource::Given;
  std::vector<Index> candidates;
  std::vector<double> provenance;
  bool quota_met = true;  // false when the fused-lasso path never reached its quota

  Index size() const { return static_cast<Index>(candidates.size()); }
};

struct BsOptions {
  int depth = 4;
  MaxEmOptions em;
};

/// Recursive one-breakpoint max-EM, each run started at the middle of its
/// sub-sample. Sub-samples shorter than 2 * max(d, min segment size) are skipped.
CandidatePool bs_candidates(const Dataset& data, const EmissionModel& model, const BsOptions& opts = {});

struct FlOptions {
  std::vector<double> lambdas;   // decreasing; empty means a geometric grid from lambda_max
  int grid_size = 40;
  double grid_ratio = 1e-4;      // smallest / largest lambda of the default grid
  double quota_per_breakpoint = 5.0;
  Index min_gap = 50;
  double keep_per_breakpoint = 1.5;
  int max_iter = 500;
  double tol = 1e-9;             // relative objective change that ends a solve
  double jump_tol = 1e-6;        // scaled by max(1, |theta_0|_inf)
};

/// Total-variation penalized per-observation location parameters:
///   minimize -sum_i log e_i(theta_i, nu_0) + lambda * sum_j sum_i |theta_{i+1,j} - theta_{i,j}|
/// where nu_0 is the nuisance part (log scale) of the full-sample MLE, held fixed.
class FusedLassoPath {
 public:
  struct Solution {
    RowMatrix theta;  // n x location_dim
    double objective = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;
  };

  FusedLassoPath(const Dataset& data, const EmissionModel& model, FlOptions opts = {});

  /// Smallest lambda at which the fully fused solution theta_i = theta_0 is optimal.
  double lambda_max() const { return lambda_max_; }
  const Eigen::VectorXd& null_theta() const { return theta0_; }
  Index length() const { return data_.size(); }

  Solution solve(double lambda, const RowMatrix* warm_start = nullptr) const;
  double objective(const RowMatrix& theta, double lambda) const;
  /// Positions i (1..n-1) where some coordinate jumps between rows i-1 and i (0-based).
  std::vector<Index> jumps(const RowMatrix& theta) const;

  /// Maximized log-likelihood of rows [begin, end) over the location
  /// parameters with the nuisance part held at nu_0 (finite even for one row).
  double segment_loglik(Index begin, Index end) const;

 private:
  double smooth_value(const RowMatrix& theta) const;
  double smooth_gradient(const RowMatrix& theta, RowMatrix& grad) const;

  const Dataset& data_;
  const EmissionModel& model_;
  FlOptions opts_;
  Eigen::VectorXd theta0_;
  Index q_;
  double lambda_max_ = 0.0;
};

/// Exact solution of min_x 0.5 |x - y|^2 + lambda * sum_i |x_{i+1} - x_i| (taut string).
void tv_prox_1d(const double* input, double* output, Index length, double lambda);

/// Fused-lasso pool for a K-segment search: the largest lambda yielding at least
/// quota_per_breakpoint * (K-1) jumps, then closest-pair pruning.
CandidatePool fl_candidates(const Dataset& data, const EmissionModel& model, Index segments,
                            const FlOptions& opts = {});

/// Closest-pair pruning until every gap (boundaries included) is at least
/// min_gap, keeping at least `keep` candidates. Within a pair the candidate whose
/// removal costs less likelihood goes (the later one on ties); a gap touching
/// 0 or n drops its only candidate.
std::vector<Index> prune_candidates(const FusedLassoPath& path, std::vector<Index> candidates,
                                    Index min_gap, Index keep);

struct SearchOptions {
  MaxEmOptions em;
  unsigned threads = 0;  // 0 means all hardware threads
};

struct SearchResult {
  SegmentedFit best;
  std::size_t runs = 0;
  std::vector<double> run_logliks;  // per subset, in lexicographic subset order
  std::vector<bool> run_degenerate;
};

/// max-EM from every (K-1)-subset of the pool; the best l_n among
/// non-degenerate fits wins, ties go to the earliest breakpoints.
SearchResult combination_search(const Dataset& data, const EmissionModel& model, Index segments,
                                 const CandidatePool& pool, const SearchOptions& opts = {});

/// All k-subsets of 0..m-1 in lexicographic order.
std::vector<std::vector<Index>> subsets(Index m, Index k);

}  // namespace maxem
