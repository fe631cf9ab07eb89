#include "maxem/init.hpp"

#include "maxem/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace maxem {

std::string to_string(PoolSource source) {
  switch (source) {
    case PoolSource::BinarySegmentation: return "bs";
    case PoolSource::FusedLasso: return "fl";
    case PoolSource::Given: return "given";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Binary segmentation

namespace {

void bs_recurse(const Dataset& data, const EmissionModel& model, const BsOptions& opts, Index begin,
                Index end, int level, std::map<Index, double>& found) {
  if (level > opts.depth) return;
  const Index min_size = std::max(model.dim(), opts.em.min_size_for(model));
  const Index m = end - begin;
  if (m < 2 * min_size) return;
  const Dataset sub = data.slice(begin, end);
  const SegmentedFit fit = max_em(sub, model, Segmentation(m, {m / 2}), opts.em);
  const Index bp = begin + fit.segmentation.breakpoints().front();
  found.emplace(bp, static_cast<double>(level));
  bs_recurse(data, model, opts, begin, bp, level + 1, found);
  bs_recurse(data, model, opts, bp, end, level + 1, found);
}

CandidatePool make_pool(PoolSource source, const std::map<Index, double>& found) {
  CandidatePool pool;
  pool.source = source;
  for (const auto& [bp, prov] : found) {
    pool.candidates.push_back(bp);
    pool.provenance.push_back(prov);
  }
  return pool;
}

}  // namespace

CandidatePool bs_candidates(const Dataset& data, const EmissionModel& model, const BsOptions& opts) {
  model.check(data);
  std::map<Index, double> found;
  bs_recurse(data, model, opts, 0, data.size(), 1, found);
  return make_pool(PoolSource::BinarySegmentation, found);
}

// ---------------------------------------------------------------------------
// Total-variation proximal step (Condat's direct algorithm)

void tv_prox_1d(const double* input, double* output, Index length, double lambda) {
  if (length <= 0) return;
  if (length == 1 || lambda <= 0.0) {
    std::copy(input, input + length, output);
    return;
  }
  const Index width = length;
  Index k = 0, k0 = 0, kplus = 0, kminus = 0;
  const double twolambda = 2.0 * lambda;
  const double minlambda = -lambda;
  double umin = lambda, umax = minlambda;
  double vmin = input[0] - lambda, vmax = input[0] + lambda;
  for (;;) {
    while (k == width - 1) {
      if (umin < 0.0) {
        do output[k0++] = vmin; while (k0 <= kminus);
        umax = (vmin = input[kminus = k = k0]) + (umin = lambda) - vmax;
      } else if (umax > 0.0) {
        do output[k0++] = vmax; while (k0 <= kplus);
        umin = (vmax = input[kplus = k = k0]) + (umax = minlambda) - vmin;
      } else {
        vmin += umin / static_cast<double>(k - k0 + 1);
        do output[k0++] = vmin; while (k0 <= k);
        return;
      }
    }
    if ((umin += input[k + 1] - vmin) < minlambda) {
      do output[k0++] = vmin; while (k0 <= kminus);
      vmax = (vmin = input[kplus = kminus = k = k0]) + twolambda;
      umin = lambda;
      umax = minlambda;
    } else if ((umax += input[k + 1] - vmax) > lambda) {
      do output[k0++] = vmax; while (k0 <= kplus);
      vmin = (vmax = input[kplus = kminus = k = k0]) - twolambda;
      umin = lambda;
      umax = minlambda;
    } else {
      ++k;
      if (umin >= lambda) {
        vmin += (umin - lambda) / static_cast<double>((kminus = k) - k0 + 1);
        umin = lambda;
      }
      if (umax <= minlambda) {
        vmax += (umax + lambda) / static_cast<double>((kplus = k) - k0 + 1);
        umax = minlambda;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Fused lasso path

FusedLassoPath::FusedLassoPath(const Dataset& data, const EmissionModel& model, FlOptions opts)
    : data_(data), model_(model), opts_(std::move(opts)), q_(model.location_dim()) {
  model_.check(data_);
  theta0_ = model_.fit(data_, RowSet::range(0, data_.size())).theta;
  const Index n = data_.size();
  Eigen::VectorXd s(model_.dim());
  Eigen::VectorXd prefix = Eigen::VectorXd::Zero(q_);
  for (Index i = 0; i + 1 < n; ++i) {
    model_.score(data_, i, theta0_, s);
    prefix -= s.head(q_);
    lambda_max_ = std::max(lambda_max_, prefix.lpNorm<Eigen::Infinity>());
  }
}

double FusedLassoPath::smooth_value(const RowMatrix& theta) const {
  Eigen::VectorXd full = theta0_;
  double f = 0.0;
  for (Index i = 0; i < data_.size(); ++i) {
    full.head(q_) = theta.row(i).transpose();
    f -= model_.log_density(data_, i, full);
  }
  return f;
}

double FusedLassoPath::smooth_gradient(const RowMatrix& theta, RowMatrix& grad) const {
  Eigen::VectorXd full = theta0_;
  Eigen::VectorXd s(model_.dim());
  grad.resize(data_.size(), q_);
  double f = 0.0;
  for (Index i = 0; i < data_.size(); ++i) {
    full.head(q_) = theta.row(i).transpose();
    f -= model_.log_density(data_, i, full);
    model_.score(data_, i, full, s);
    grad.row(i) = -s.head(q_).transpose();
  }
  return f;
}

double FusedLassoPath::objective(const RowMatrix& theta, double lambda) const {
  const Index n = theta.rows();
  const double tv = n > 1 ? (theta.bottomRows(n - 1) - theta.topRows(n - 1)).cwiseAbs().sum() : 0.0;
  return smooth_value(theta) + lambda * tv;
}

FusedLassoPath::Solution FusedLassoPath::solve(double lambda, const RowMatrix* warm_start) const {
  const Index n = data_.size();
  Solution sol;
  if (warm_start) {
    sol.theta = *warm_start;
  } else {
    sol.theta = theta0_.head(q_).transpose().replicate(n, 1);
  }
  auto& theta = sol.theta;

  // Initial step from the largest per-row curvature.
  double curvature = 0.0;
  {
    Eigen::VectorXd full = theta0_;
    Eigen::MatrixXd h(model_.dim(), model_.dim());
    for (Index i = 0; i < n; ++i) {
      full.head(q_) = theta.row(i).transpose();
      h.setZero();
      model_.add_hessian(data_, i, full, h);
      curvature = std::max(curvature, -h.diagonal().head(q_).sum());
    }
  }
  double step = curvature > 0.0 && std::isfinite(curvature) ? 1.0 / curvature : 1.0;

  RowMatrix grad, trial(n, q_);
  Eigen::VectorXd column(n), proxed(n);
  double obj = objective(theta, lambda);
  sol.objective_trace.push_back(obj);
  for (int it = 0; it < opts_.max_iter; ++it) {
    const double f = smooth_gradient(theta, grad);
    double f_trial = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      for (Index j = 0; j < q_; ++j) {
        column = theta.col(j) - step * grad.col(j);
        tv_prox_1d(column.data(), proxed.data(), n, step * lambda);
        trial.col(j) = proxed;
      }
      f_trial = smooth_value(trial);
      const RowMatrix diff = trial - theta;
      const double bound = f + (grad.cwiseProduct(diff)).sum() + diff.squaredNorm() / (2.0 * step);
      if (std::isfinite(f_trial) && f_trial <= bound + 1e-12 * std::max(1.0, std::abs(f))) break;
      step *= 0.5;
    }
    const double tv = n > 1 ? (trial.bottomRows(n - 1) - trial.topRows(n - 1)).cwiseAbs().sum() : 0.0;
    const double next_obj = f_trial + lambda * tv;
    sol.iterations = it + 1;
    if (!(next_obj <= obj)) break;  // no further decrease representable
    theta.swap(trial);
    sol.objective_trace.push_back(next_obj);
    const bool done = obj - next_obj <= opts_.tol * std::max(1.0, std::abs(obj));
    obj = next_obj;
    if (done) break;
    step *= 1.1;
  }
  sol.objective = obj;
  return sol;
}

std::vector<Index> FusedLassoPath::jumps(const RowMatrix& theta) const {
  const double tol = opts_.jump_tol * std::max(1.0, theta0_.head(q_).lpNorm<Eigen::Infinity>());
  std::vector<Index> out;
  for (Index i = 1; i < theta.rows(); ++i)
    if ((theta.row(i) - theta.row(i - 1)).cwiseAbs().maxCoeff() > tol) out.push_back(i);
  return out;
}

double FusedLassoPath::segment_loglik(Index begin, Index end) const {
  // Newton over the location block with a tiny ridge so single rows stay finite.
  constexpr double kRidge = 1e-6;
  Eigen::VectorXd full = theta0_;
  Eigen::VectorXd s(model_.dim());
  Eigen::MatrixXd h(model_.dim(), model_.dim());
  const RowSet rows = RowSet::range(begin, end);
  auto value = [&](const Eigen::VectorXd& t) {
    return model_.log_likelihood(data_, rows, t) - kRidge * (t.head(q_) - theta0_.head(q_)).squaredNorm();
  };
  double f = value(full);
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd g = model_.score_sum(data_, rows, full).head(q_) -
                        2.0 * kRidge * (full.head(q_) - theta0_.head(q_));
    if (g.lpNorm<Eigen::Infinity>() <= 1e-10 * static_cast<double>(end - begin)) break;
    h = model_.hessian_sum(data_, rows, full);
    Eigen::MatrixXd neg = -h.topLeftCorner(q_, q_);
    neg.diagonal().array() += 2.0 * kRidge;
    const Eigen::VectorXd dir = neg.ldlt().solve(g);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k) {
      Eigen::VectorXd cand = full;
      cand.head(q_) += t * dir;
      const double fc = value(cand);
      if (std::isfinite(fc) && fc >= f) {
        moved = fc > f;
        full = std::move(cand);
        f = fc;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return model_.log_likelihood(data_, rows, full);
}

std::vector<Index> prune_candidates(const FusedLassoPath& path, std::vector<Index> candidates,
                                    Index min_gap, Index keep) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const Index n = path.length();
  // Likelihood lost by removing candidates[j], i.e. merging its two neighbours.
  auto removal_cost = [&](std::size_t j) {
    const Index prev = j == 0 ? 0 : candidates[j - 1];
    const Index next = j + 1 == candidates.size() ? n : candidates[j + 1];
    const Index c = candidates[j];
    return path.segment_loglik(prev, c) + path.segment_loglik(c, next) - path.segment_loglik(prev, next);
  };
  while (static_cast<Index>(candidates.size()) > keep && !candidates.empty()) {
    // gaps[g] lies between boundary/candidate g-1 and g; gaps[0] starts at 0, the last ends at n
    const std::size_t m = candidates.size();
    std::size_t at = 0;
    Index smallest = std::numeric_limits<Index>::max();
    for (std::size_t g = 0; g <= m; ++g) {
      const Index lo = g == 0 ? 0 : candidates[g - 1];
      const Index hi = g == m ? n : candidates[g];
      if (hi - lo < smallest) {
        smallest = hi - lo;
        at = g;
      }
    }
    if (smallest >= min_gap) break;
    std::size_t drop;
    if (at == 0) {
      drop = 0;
    } else if (at == m) {
      drop = m - 1;
    } else {
      const double cost_first = removal_cost(at - 1);
      const double cost_second = removal_cost(at);
      drop = cost_first < cost_second ? at - 1 : at;
    }
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return candidates;
}

CandidatePool fl_candidates(const Dataset& data, const EmissionModel& model, Index segments,
                            const FlOptions& opts) {
  if (segments < 1) throw DataError("number of segments must be positive");
  const FusedLassoPath path(data, model, opts);
  const Index quota = static_cast<Index>(std::ceil(opts.quota_per_breakpoint * static_cast<double>(segments - 1)));
  const Index keep = static_cast<Index>(std::floor(opts.keep_per_breakpoint * static_cast<double>(segments - 1)));

  std::vector<double> grid = opts.lambdas;
  if (grid.empty()) {
    const int g = std::max(2, opts.grid_size);
    for (int k = 0; k < g; ++k)
      grid.push_back(path.lambda_max() * std::pow(opts.grid_ratio, static_cast<double>(k) / (g - 1)));
  }

  CandidatePool pool;
  pool.source = PoolSource::FusedLasso;
  pool.quota_met = false;
  std::vector<Index> best;
  double best_lambda = grid.empty() ? 0.0 : grid.front();
  RowMatrix warm;
  for (double lambda : grid) {
    const auto sol = path.solve(lambda, warm.size() ? &warm : nullptr);
    warm = sol.theta;
    auto found = path.jumps(sol.theta);
    if (found.size() > best.size() || best.empty()) {
      best = found;
      best_lambda = lambda;
    }
    if (static_cast<Index>(found.size()) >= quota) {
      best = std::move(found);
      best_lambda = lambda;
      pool.quota_met = true;
      break;
    }
  }
  pool.candidates = prune_candidates(path, std::move(best), opts.min_gap, keep);
  pool.provenance.assign(pool.candidates.size(), best_lambda);
  return pool;
}

// ---------------------------------------------------------------------------
// Combination search

std::vector<std::vector<Index>> subsets(Index m, Index k) {
  std::vector<std::vector<Index>> out;
  if (k < 0 || k > m) return out;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = j;
  while (true) {
    out.push_back(idx);
    Index j = k - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == m - k + j) --j;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
    for (Index t = j + 1; t < k; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
  }
  return out;
}

namespace {

// Strict preference: admissible first, then larger l_n, then earlier breakpoints.
bool preferred(const SegmentedFit& a, const SegmentedFit& b) {
  if (a.degenerate != b.degenerate) return !a.degenerate;
  const double scale = std::max(1.0, std::max(std::abs(a.loglik), std::abs(b.loglik)));
  if (std::abs(a.loglik - b.loglik) > 1e-10 * scale) return a.loglik > b.loglik;
  return a.segmentation.breakpoints() < b.segmentation.breakpoints();
}

}  // namespace

SearchResult combination_search(const Dataset& data, const EmissionModel& model, Index segments,
                                 const CandidatePool& pool, const SearchOptions& opts) {
  model.check(data);
  const Index n = data.size();
  SearchResult result;
  if (segments < 1 || segments > n)
    throw DataError("cannot split " + std::to_string(n) + " rows into " + std::to_string(segments) + " segments");
  if (segments == 1) {
    result.best = fit_segmentation(data, model, Segmentation::single(n), opts.em);
    result.runs = 1;
    result.run_logliks = {result.best.loglik};
    result.run_degenerate = {result.best.degenerate};
    return result;
  }
  std::vector<Index> cands;
  for (Index c : pool.candidates)
    if (c >= 1 && c < n && (cands.empty() || c > cands.back())) cands.push_back(c);
  if (static_cast<Index>(cands.size()) < segments - 1)
    throw DataError("candidate pool has " + std::to_string(cands.size()) + " breakpoint(s) but " +
                    std::to_string(segments - 1) +
                    " are needed; use a deeper binary segmentation or a smaller fused-lasso lambda");

  const auto combos = subsets(static_cast<Index>(cands.size()), segments - 1);
  std::vector<SegmentedFit> fits(combos.size());
  parallel_for(combos.size(), opts.threads, [&](std::size_t c) {
    std::vector<Index> bps;
    for (Index j : combos[c]) bps.push_back(cands[static_cast<std::size_t>(j)]);
    fits[c] = max_em(data, model, Segmentation(n, std::move(bps)), opts.em);
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < fits.size(); ++c)
    if (preferred(fits[c], fits[best])) best = c;
  result.runs = fits.size();
  for (const auto& f : fits) {
    result.run_logliks.push_back(f.loglik);
    result.run_degenerate.push_back(f.degenerate);
  }
  result.best = std::move(fits[best]);
  return result;
}

}  // namespace maxem
