#pragma once

#include "maxem/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maxem {

enum class Regime { Score, LeftTail, RightTail };
enum class TailSide { Left, Right };

std::string to_string(Regime regime);

struct LrPoint {
  Index n1 = 0;
  double statistic = 0.0;  // approximate 2(l(theta_1, theta_2; n1) - l(theta_0)); may be negative
  Regime regime = Regime::Score;
};

/// Approximate likelihood-ratio curve over the feasible n1. Points whose tail
/// refit is degenerate are left out and listed in `excluded`.
struct LrCurve {
  std::vector<LrPoint> points;
  std::vector<Index> excluded;
  double t_n = 0.0;
  Index n1_hat = 0;
};

struct LrOptions {
  Index t_low = 100;
  FitOptions fit;
  /// Tail (small-sample) points; defaults to the model's exact_small_sample().
  std::optional<bool> use_tails;
};

/// Quantities under H0 that do not depend on row order: the full-sample MLE,
/// per-row log-densities and scores at it, and the information matrix.
class NullModel {
 public:
  NullModel(const Dataset& data, const EmissionModel& model, const FitOptions& fit = {});

  const Dataset& data() const { return data_; }
  const EmissionModel& model() const { return model_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  double loglik() const { return loglik_; }
  /// -(1/n) sum_i Hessian log e_i(theta_0).
  const Eigen::MatrixXd& information() const { return info_; }
  const Eigen::VectorXd& log_densities() const { return logp_; }
  const RowMatrix& scores() const { return scores_; }
  /// Scores premultiplied by L^{-1} where information = L L'.
  const RowMatrix& whitened_scores() const { return whitened_; }

 private:
  const Dataset& data_;
  const EmissionModel& model_;
  Eigen::VectorXd theta_;
  double loglik_ = 0.0;
  Eigen::MatrixXd info_;
  Eigen::VectorXd logp_;
  RowMatrix scores_;
  RowMatrix whitened_;
};

/// Score-based approximation for every n1 in [first, last). `order` permutes
/// the rows (order[j] is the source row of position j); empty means identity.
std::vector<LrPoint> score_scan(const NullModel& null, Index first, Index last,
                                   std::span<const Index> order = {});

/// Single-tail refit 2 sum_{tail} (log e_i(theta_tail) - log e_i(theta_0)); empty
/// when the tail has fewer than d+1 rows or its refit is degenerate.
std::optional<double> tail_lr(const NullModel& null, Index n1, TailSide side,
                                    const FitOptions& fit = {}, std::span<const Index> order = {});

/// Stitched curve: tails below t_low and at or above n - t_low (when enabled),
/// the score approximation in between.
LrCurve lr_scan(const NullModel& null, const LrOptions& opts = {}, std::span<const Index> order = {});
LrCurve lr_scan(const Dataset& data, const EmissionModel& model, const LrOptions& opts = {});

/// 2(l(theta_1) + l(theta_2) - l(theta_0)) with both sides refit.
double exact_lr(const Dataset& data, const EmissionModel& model, Index n1, const FitOptions& fit = {});

struct PermutationResult {
  Index replicates = 0;
  std::uint64_t seed = 0;
  double observed = 0.0;
  std::vector<double> null_statistics;
  double p_value = 1.0;   // (1 + #{null >= observed}) / (B + 1)
  double q95 = 0.0;       // empirical 0.95 quantile of the null statistics
};

struct LrTestResult {
  LrCurve curve;
  PermutationResult permutation;
};

/// Observed curve plus B row permutations; replicate b draws from its own
/// stream (seed, b), so the result does not depend on the thread count.
LrTestResult permutation_test(const Dataset& data, const EmissionModel& model, Index replicates,
                              std::uint64_t seed, const LrOptions& opts = {}, unsigned threads = 0);

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> values, double prob);

/// CSV with header n1,statistic,regime.
void write_curve_csv(std::ostream& out, const LrCurve& curve);

}  // namespace maxem
