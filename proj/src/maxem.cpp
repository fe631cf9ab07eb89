#include "maxem/maxem.hpp"

#include "maxem/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace maxem {

FitResult fit_segment(const Dataset& data, const EmissionModel& model, Index begin, Index end,
                      Index min_size, const FitOptions& opts, const Eigen::VectorXd* warm_start) {
  const RowSet rows = RowSet::range(begin, end);
  if (end - begin >= min_size) return model.fit(data, rows, opts, warm_start);
  FitOptions ridged = opts;
  ridged.ridge = std::max(opts.ridge, opts.separation_ridge);
  FitResult res = model.fit(data, rows, ridged, warm_start);
  res.degenerate = true;
  return res;
}

namespace {

void finish(SegmentedFit& fit) {
  fit.loglik = 0.0;
  fit.degenerate = false;
  for (std::size_t k = 0; k < fit.thetas.size(); ++k) {
    fit.loglik += fit.segment_loglik[k];
    fit.degenerate = fit.degenerate || fit.segment_degenerate[k];
  }
}

// M-step warm-started from `previous`; a segment keeps its old parameters when
// the refit does not beat them, so the step never lowers l_n.
SegmentedFit m_step(const Dataset& data, const EmissionModel& model, const Segmentation& seg,
                    const MaxEmOptions& opts, const std::vector<Eigen::VectorXd>* previous) {
  const Index K = seg.num_segments();
  const Index min_size = opts.min_size_for(model);
  SegmentedFit out;
  out.segmentation = seg;
  out.thetas.resize(static_cast<std::size_t>(K));
  out.segment_loglik.resize(static_cast<std::size_t>(K));
  out.segment_degenerate.resize(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::VectorXd* warm = previous ? &(*previous)[ks] : nullptr;
    FitResult res = fit_segment(data, model, seg.begin(k), seg.end(k), min_size, opts.fit, warm);
    if (warm) {
      const double old_ll = model.log_likelihood(data, RowSet::range(seg.begin(k), seg.end(k)), *warm);
      if (!(res.loglik >= old_ll)) {
        res.theta = *warm;
        res.loglik = old_ll;
        res.degenerate = res.degenerate || seg.segment_size(k) < min_size;
      }
    }
    out.thetas[ks] = std::move(res.theta);
    out.segment_loglik[ks] = res.loglik;
    out.segment_degenerate[ks] = res.degenerate;
  }
  finish(out);
  return out;
}

}  // namespace

SegmentedFit fit_segmentation(const Dataset& data, const EmissionModel& model, const Segmentation& seg,
                              const MaxEmOptions& opts) {
  model.check(data);
  if (seg.length() != data.size()) throw DataError("segmentation length does not match the data");
  SegmentedFit out = m_step(data, model, seg, opts, nullptr);
  out.iterations = 0;
  out.converged = true;
  out.trace = {out.loglik};
  return out;
}

SegmentedFit max_em(const Dataset& data, const EmissionModel& model, const Segmentation& initial,
                    const MaxEmOptions& opts) {
  model.check(data);
  const Index n = data.size();
  const Index K = initial.num_segments();
  if (initial.length() != n) throw DataError("initial segmentation length does not match the data");
  if (K > n) throw DataError("more segments than observations");

  SegmentedFit current = m_step(data, model, initial, opts, nullptr);
  std::vector<double> trace{current.loglik};
  current.iterations = 0;
  current.converged = true;
  if (K == 1) {
    current.trace = trace;
    return current;
  }

  std::deque<Segmentation> seen{initial};
  SegmentedFit best = current;
  bool converged = false;
  int it = 0;
  while (it < opts.max_iter) {
    const LatticeScores lattice = max_forward_backward(data, model, current.thetas);
    Segmentation next = map_decode(lattice);
    if (next == current.segmentation) {
      converged = true;
      break;
    }
    ++it;
    SegmentedFit updated = m_step(data, model, next, opts, &current.thetas);
    trace.push_back(updated.loglik);
    const double gain = updated.loglik - current.loglik;
    const bool revisit = std::find(seen.begin(), seen.end(), next) != seen.end();
    current = std::move(updated);
    if (current.loglik > best.loglik) best = current;
    if (revisit || gain < opts.tol) {
      converged = true;
      break;
    }
    seen.push_back(next);
    if (static_cast<int>(seen.size()) > opts.history) seen.pop_front();
  }
  SegmentedFit& out = current.loglik >= best.loglik ? current : best;
  out.iterations = it;
  out.converged = converged;
  out.trace = std::move(trace);
  return std::move(out);
}

double evaluate_loglik(const Dataset& data, const EmissionModel& model, const SegmentedFit& fit) {
  double total = 0.0;
  const auto& seg = fit.segmentation;
  for (Index k = 0; k < seg.num_segments(); ++k)
    total += model.log_likelihood(data, RowSet::range(seg.begin(k), seg.end(k)),
                                  fit.thetas[static_cast<std::size_t>(k)]);
  return total;
}

double bic(double loglik, Index dim, Index segments, Index n) {
  return -2.0 * loglik + static_cast<double>(dim * segments) * std::log(static_cast<double>(n));
}

double bic(const SegmentedFit& fit, const EmissionModel& model) {
  return bic(fit.loglik, model.dim(), fit.num_segments(), fit.segmentation.length());
}

Segmentation even_segmentation(Index n, Index segments) {
  if (segments < 1 || segments > n) throw DataError("cannot split " + std::to_string(n) + " rows into " +
                                                    std::to_string(segments) + " segments");
  std::vector<Index> bps;
  for (Index k = 1; k < segments; ++k) bps.push_back(k * n / segments);
  return Segmentation(n, std::move(bps));
}

}  // namespace maxem
