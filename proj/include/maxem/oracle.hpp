#pragma once

#include "maxem/maxem.hpp"

#include <cstddef>
#include <map>
#include <mutex>
#include <utility>

namespace maxem {

/// Memoized per-interval MLE fits keyed by the 0-based half-open range.
/// Safe for concurrent use; concurrent misses on one key compute identical values.
class SegmentFitCache {
 public:
  SegmentFitCache(const Dataset& data, const EmissionModel& model, Index min_size, FitOptions opts = {});

  /// Fit of rows [begin, end); warm_start only affects the first computation.
  FitResult get(Index begin, Index end, const Eigen::VectorXd* warm_start = nullptr);

  std::size_t size() const;
  std::size_t misses() const;
  std::size_t hits() const;

 private:
  const Dataset& data_;
  const EmissionModel& model_;
  Index min_size_;
  FitOptions opts_;
  mutable std::mutex mutex_;
  std::map<std::pair<Index, Index>, FitResult> fits_;
  std::size_t misses_ = 0;
  std::size_t hits_ = 0;
};

struct BruteForceOptions {
  double max_cost_guard = 1e7;  // limit on the number of segmentations enumerated
  Index min_segment_size = 0;   // 0 means the model dimension d
  FitOptions fit;
};

/// Number of segmentations of n rows into K segments, C(n-1, K-1), as a double.
double segmentation_count(Index n, Index segments);

/// Exact maximizer of l_n over all segmentations with K segments. Segments
/// shorter than the minimum size or with degenerate fits are not admissible;
/// ties go to the lexicographically earliest breakpoints.
SegmentedFit brute_force(const Dataset& data, const EmissionModel& model, Index segments,
                         const BruteForceOptions& opts = {});
SegmentedFit brute_force(const Dataset& data, const EmissionModel& model, Index segments,
                         SegmentFitCache& cache, const BruteForceOptions& opts = {});

}  // namespace maxem
