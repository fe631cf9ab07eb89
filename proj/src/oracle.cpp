#include "maxem/oracle.hpp"

#include <cmath>
#include <limits>

namespace maxem {

SegmentFitCache::SegmentFitCache(const Dataset& data, const EmissionModel& model, Index min_size,
                                 FitOptions opts)
    : data_(data), model_(model), min_size_(min_size > 0 ? min_size : model.dim()), opts_(opts) {
  model_.check(data_);
}

FitResult SegmentFitCache::get(Index begin, Index end, const Eigen::VectorXd* warm_start) {
  const auto key = std::make_pair(begin, end);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = fits_.find(key);
    if (it != fits_.end()) {
      ++hits_;
      return it->second;
    }
  }
  FitResult res = fit_segment(data_, model_, begin, end, min_size_, opts_, warm_start);
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = fits_.emplace(key, std::move(res));
  if (inserted) {
    ++misses_;
  } else {
    ++hits_;
  }
  return it->second;
}

std::size_t SegmentFitCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return fits_.size();
}

std::size_t SegmentFitCache::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

std::size_t SegmentFitCache::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

double segmentation_count(Index n, Index segments) {
  if (segments < 1 || segments > n) return 0.0;
  const double a = static_cast<double>(n - 1);
  const double b = static_cast<double>(segments - 1);
  return std::round(std::exp(std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0)));
}

SegmentedFit brute_force(const Dataset& data, const EmissionModel& model, Index segments,
                         const BruteForceOptions& opts) {
  SegmentFitCache cache(data, model, opts.min_segment_size, opts.fit);
  return brute_force(data, model, segments, cache, opts);
}

SegmentedFit brute_force(const Dataset& data, const EmissionModel& model, Index segments,
                         SegmentFitCache& cache, const BruteForceOptions& opts) {
  model.check(data);
  const Index n = data.size();
  const Index K = segments;
  if (K < 1 || K > n) throw DataError("cannot split " + std::to_string(n) + " rows into " + std::to_string(K) + " segments");
  const double count = segmentation_count(n, K);
  if (count > opts.max_cost_guard)
    throw DataError("brute force would enumerate " + format_double(count) +
                    " segmentations (guard " + format_double(opts.max_cost_guard) + "); use max-EM instead");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto admissible = [](const FitResult& f) { return f.degenerate ? kNegInf : f.loglik; };

  std::vector<Index> best_bps;
  double best = kNegInf;
  bool found = false;

  if (K == 1) {
    found = true;
  } else if (K == 2) {
    // O(n) sweep; each side is warm-started from its neighbour.
    best_bps = {1};
    Eigen::VectorXd left_warm, right_warm;
    for (Index b = 1; b < n; ++b) {
      const FitResult left = cache.get(0, b, left_warm.size() ? &left_warm : nullptr);
      const FitResult right = cache.get(b, n, right_warm.size() ? &right_warm : nullptr);
      left_warm = left.theta;
      right_warm = right.theta;
      const double v = admissible(left) + admissible(right);
      if (v > best) {
        best = v;
        best_bps = {b};
        found = true;
      }
    }
  } else {
    std::vector<Index> bps(static_cast<std::size_t>(K - 1));
    for (Index j = 0; j < K - 1; ++j) bps[static_cast<std::size_t>(j)] = j + 1;
    best_bps = bps;
    while (true) {
      double v = 0.0;
      Index prev = 0;
      for (Index j = 0; j <= K - 1 && v != kNegInf; ++j) {
        const Index end = j < K - 1 ? bps[static_cast<std::size_t>(j)] : n;
        v += admissible(cache.get(prev, end));
        prev = end;
      }
      if (v > best) {
        best = v;
        best_bps = bps;
        found = true;
      }
      // next combination in lexicographic order
      Index j = K - 2;
      while (j >= 0 && bps[static_cast<std::size_t>(j)] == n - (K - 1) + j) --j;
      if (j < 0) break;
      ++bps[static_cast<std::size_t>(j)];
      for (Index t = j + 1; t < K - 1; ++t) bps[static_cast<std::size_t>(t)] = bps[static_cast<std::size_t>(t - 1)] + 1;
    }
  }

  Segmentation seg(n, best_bps);
  SegmentedFit out;
  out.segmentation = seg;
  out.loglik = 0.0;
  for (Index k = 0; k < K; ++k) {
    const FitResult f = cache.get(seg.begin(k), seg.end(k));
    out.thetas.push_back(f.theta);
    out.segment_loglik.push_back(f.loglik);
    out.segment_degenerate.push_back(f.degenerate);
    out.loglik += f.loglik;
    out.degenerate = out.degenerate || f.degenerate;
  }
  out.iterations = 0;
  out.converged = found;
  out.trace = {out.loglik};
  return out;
}

}  // namespace maxem
