#include "maxem/lrtest.hpp"

#include "maxem/parallel.hpp"
#include "maxem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace maxem {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::Score: return "score";
    case Regime::LeftTail: return "left_tail";
    case Regime::RightTail: return "right_tail";
  }
  return "unknown";
}

NullModel::NullModel(const Dataset& data, const EmissionModel& model, const FitOptions& fit)
    : data_(data), model_(model) {
  model_.check(data_);
  const Index n = data_.size();
  const Index d = model_.dim();
  const FitResult res = model_.fit(data_, RowSet::range(0, n), fit);
  theta_ = res.theta;
  loglik_ = res.loglik;
  logp_.resize(n);
  scores_.resize(n, d);
  Eigen::VectorXd s(d);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (Index i = 0; i < n; ++i) {
    logp_[i] = model_.log_density(data_, i, theta_);
    model_.score(data_, i, theta_, s);
    scores_.row(i) = s.transpose();
    model_.add_hessian(data_, i, theta_, h);
  }
  info_ = -Eigen::MatrixXd(h.selfadjointView<Eigen::Lower>()) / static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(info_);
  if (llt.info() != Eigen::Success || !info_.allFinite())
    throw DataError("information matrix at the null fit is not positive definite; "
                    "the model may be misspecified or need a ridge");
  // u_i = L^{-1} s_i, row-wise: U' = L^{-1} S'
  Eigen::MatrixXd st = scores_.transpose();
  llt.matrixL().solveInPlace(st);
  whitened_ = st.transpose();
}

namespace {

Index row_at(std::span<const Index> order, Index j) {
  return order.empty() ? j : order[static_cast<std::size_t>(j)];
}

}  // namespace

std::vector<LrPoint> score_scan(const NullModel& null, Index first, Index last, std::span<const Index> order) {
  const RowMatrix& u = null.whitened_scores();
  const Index n = u.rows();
  first = std::max<Index>(first, 1);
  last = std::min(last, n);
  std::vector<LrPoint> out;
  if (first >= last) return out;
  const Eigen::RowVectorXd total = u.colwise().sum();
  Eigen::RowVectorXd s1 = Eigen::RowVectorXd::Zero(u.cols());
  const double nn = static_cast<double>(n);
  for (Index j = 0; j < first - 1; ++j) s1 += u.row(row_at(order, j));
  out.reserve(static_cast<std::size_t>(last - first));
  for (Index n1 = first; n1 < last; ++n1) {
    s1 += u.row(row_at(order, n1 - 1));
    const Eigen::RowVectorXd s2 = total - s1;
    const double a = static_cast<double>(n1);
    const double b = nn - a;
    const double stat = b / (nn * a) * s1.squaredNorm() + a / (nn * b) * s2.squaredNorm() - 2.0 / nn * s1.dot(s2);
    out.push_back({n1, stat, Regime::Score});
  }
  return out;
}

std::optional<double> tail_lr(const NullModel& null, Index n1, TailSide side, const FitOptions& fit,
                                    std::span<const Index> order) {
  const Index n = null.data().size();
  const Index d = null.model().dim();
  if (n1 < 1 || n1 >= n) return std::nullopt;
  const Index begin = side == TailSide::Left ? 0 : n1;
  const Index end = side == TailSide::Left ? n1 : n;
  if (end - begin < d + 1) return std::nullopt;
  std::vector<Index> rows(static_cast<std::size_t>(end - begin));
  double base = 0.0;
  for (Index j = begin; j < end; ++j) {
    rows[static_cast<std::size_t>(j - begin)] = row_at(order, j);
    base += null.log_densities()[row_at(order, j)];
  }
  const FitResult res = null.model().fit(null.data(), RowSet(rows), fit, &null.theta());
  if (res.degenerate) return std::nullopt;
  return 2.0 * (res.loglik - base);
}

namespace {

struct TailRange {
  Index left_end = 0;     // left tail covers n1 in [1, left_end)
  Index right_begin = 0;  // right tail covers n1 in [right_begin, n)
};

// Tail points for Gaussian models from running sufficient statistics.
void gaussian_tails(const NullModel& null, const TailRange& r, std::span<const Index> order,
                    std::vector<LrPoint>& left, std::vector<LrPoint>& right, std::vector<Index>& excluded) {
  const Dataset& data = null.data();
  const Index n = data.size();
  const Index d = null.model().dim();
  const bool covariates = null.model().kind() == ModelKind::Linear;
  const auto& logp = null.log_densities();
  GaussianAccumulator acc(data.num_covariates(), covariates);
  double base = 0.0;
  for (Index n1 = 1; n1 < r.left_end; ++n1) {
    const Index i = row_at(order, n1 - 1);
    acc.add(data, i);
    base += logp[i];
    const FitResult f = n1 >= d + 1 ? acc.fit() : FitResult{};
    if (n1 < d + 1 || f.degenerate) {
      excluded.push_back(n1);
      continue;
    }
    left.push_back({n1, 2.0 * (f.loglik - base), Regime::LeftTail});
  }
  GaussianAccumulator tail(data.num_covariates(), covariates);
  base = 0.0;
  std::vector<LrPoint> rev;
  std::vector<Index> rev_excluded;
  for (Index n1 = n - 1; n1 >= r.right_begin; --n1) {
    const Index i = row_at(order, n1);
    tail.add(data, i);
    base += logp[i];
    const Index m = n - n1;
    const FitResult f = m >= d + 1 ? tail.fit() : FitResult{};
    if (m < d + 1 || f.degenerate) {
      rev_excluded.push_back(n1);
      continue;
    }
    rev.push_back({n1, 2.0 * (f.loglik - base), Regime::RightTail});
  }
  right.assign(rev.rbegin(), rev.rend());
  excluded.insert(excluded.end(), rev_excluded.rbegin(), rev_excluded.rend());
}

void finalize(LrCurve& curve) {
  std::sort(curve.excluded.begin(), curve.excluded.end());
  if (curve.points.empty()) throw DataError("likelihood-ratio curve has no feasible point");
  curve.t_n = curve.points.front().statistic;
  curve.n1_hat = curve.points.front().n1;
  for (const auto& p : curve.points) {
    if (p.statistic > curve.t_n) {
      curve.t_n = p.statistic;
      curve.n1_hat = p.n1;
    }
  }
}

}  // namespace

LrCurve lr_scan(const NullModel& null, const LrOptions& opts, std::span<const Index> order) {
  const Index n = null.data().size();
  const Index t = std::max<Index>(opts.t_low, 1);
  const bool tails = opts.use_tails.value_or(null.model().exact_small_sample());
  LrCurve curve;
  if (!tails) {
    if (n < 2 * t)
      throw DataError("the score approximation needs n >= 2 * t_low (" + std::to_string(2 * t) + "), got n = " +
                      std::to_string(n));
    curve.points = score_scan(null, t, n - t, order);
    finalize(curve);
    return curve;
  }
  TailRange r;
  r.left_end = std::min(t, n);
  r.right_begin = std::max(n - t, r.left_end);
  std::vector<LrPoint> left, right;
  if (null.model().exact_small_sample()) {
    gaussian_tails(null, r, order, left, right, curve.excluded);
  } else {
    for (Index n1 = 1; n1 < r.left_end; ++n1) {
      if (auto v = tail_lr(null, n1, TailSide::Left, opts.fit, order)) {
        left.push_back({n1, *v, Regime::LeftTail});
      } else {
        curve.excluded.push_back(n1);
      }
    }
    for (Index n1 = r.right_begin; n1 < n; ++n1) {
      if (auto v = tail_lr(null, n1, TailSide::Right, opts.fit, order)) {
        right.push_back({n1, *v, Regime::RightTail});
      } else {
        curve.excluded.push_back(n1);
      }
    }
  }
  const auto middle = score_scan(null, r.left_end, r.right_begin, order);
  curve.points = std::move(left);
  curve.points.insert(curve.points.end(), middle.begin(), middle.end());
  curve.points.insert(curve.points.end(), right.begin(), right.end());
  finalize(curve);
  return curve;
}

LrCurve lr_scan(const Dataset& data, const EmissionModel& model, const LrOptions& opts) {
  const NullModel null(data, model, opts.fit);
  return lr_scan(null, opts);
}

double exact_lr(const Dataset& data, const EmissionModel& model, Index n1, const FitOptions& fit) {
  const Index n = data.size();
  if (n1 < 1 || n1 >= n) throw DataError("n1 must lie in 1..n-1");
  const double l0 = model.fit(data, RowSet::range(0, n), fit).loglik;
  const double l1 = model.fit(data, RowSet::range(0, n1), fit).loglik;
  const double l2 = model.fit(data, RowSet::range(n1, n), fit).loglik;
  return 2.0 * (l1 + l2 - l0);
}

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

LrTestResult permutation_test(const Dataset& data, const EmissionModel& model, Index replicates,
                              std::uint64_t seed, const LrOptions& opts, unsigned threads) {
  if (replicates < 1) throw DataError("the permutation test needs at least one replicate");
  const NullModel null(data, model, opts.fit);
  LrTestResult out;
  out.curve = lr_scan(null, opts);
  auto& perm = out.permutation;
  perm.replicates = replicates;
  perm.seed = seed;
  perm.observed = out.curve.t_n;
  perm.null_statistics.assign(static_cast<std::size_t>(replicates), 0.0);
  const Index n = data.size();
  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t b) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed, b + 1);
    rng.shuffle(std::span<Index>(order));
    perm.null_statistics[b] = lr_scan(null, opts, order).t_n;
  });
  const auto exceed = std::count_if(perm.null_statistics.begin(), perm.null_statistics.end(),
                                    [&](double v) { return v >= perm.observed; });
  perm.p_value = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(replicates) + 1.0);
  perm.q95 = sample_quantile(perm.null_statistics, 0.95);
  return out;
}

void write_curve_csv(std::ostream& out, const LrCurve& curve) {
  out << "n1,statistic,regime\n";
  for (const auto& p : curve.points) out << p.n1 << ',' << format_double(p.statistic) << ',' << to_string(p.regime) << '\n';
}

}  // namespace maxem
