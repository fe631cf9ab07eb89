#pragma once

#include "maxem/data.hpp"
#include "maxem/models.hpp"

#include <vector>

namespace maxem {

struct MaxEmOptions {
  int max_iter = 100;
  double tol = 1e-9;               // stop once l_n improves by less than this
  Index min_segment_size = 0;      // 0 means the model dimension d
  int history = 8;                 // recent segmentations kept for cycle detection
  FitOptions fit;

  Index min_size_for(const EmissionModel& model) const {
    return min_segment_size > 0 ? min_segment_size : model.dim();
  }
};

/// Segmentation with per-segment parameters and the emission part of the
/// complete-data log-likelihood.
struct SegmentedFit {
  Segmentation segmentation;
  std::vector<Eigen::VectorXd> thetas;
  std::vector<double> segment_loglik;
  std::vector<bool> segment_degenerate;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = true;
  bool degenerate = false;
  std::vector<double> trace;  // l_n after each M-step, starting with the initial one

  Index num_segments() const { return segmentation.num_segments(); }
};

/// MLE on rows [begin, end). Segments shorter than min_size get a ridge fit
/// and are flagged degenerate.
FitResult fit_segment(const Dataset& data, const EmissionModel& model, Index begin, Index end,
                      Index min_size, const FitOptions& opts = {},
                      const Eigen::VectorXd* warm_start = nullptr);

/// Per-segment MLE for a fixed segmentation (the M-step).
SegmentedFit fit_segmentation(const Dataset& data, const EmissionModel& model, const Segmentation& seg,
                              const MaxEmOptions& opts = {});

/// Alternates MAP decoding and per-segment MLE from `initial` until the
/// segmentation repeats. trace is non-decreasing.
SegmentedFit max_em(const Dataset& data, const EmissionModel& model, const Segmentation& initial,
                    const MaxEmOptions& opts = {});

/// sum_k sum_{i in C_k} log e_i(k; theta_k), recomputed from the rows.
double evaluate_loglik(const Dataset& data, const EmissionModel& model, const SegmentedFit& fit);

/// -2 l_n + d K log n.
double bic(double loglik, Index dim, Index segments, Index n);
double bic(const SegmentedFit& fit, const EmissionModel& model);

/// Breakpoints splitting 0..n into K nearly equal parts.
Segmentation even_segmentation(Index n, Index segments);

}  // namespace maxem
