#include "maxem/select.hpp"

#include <algorithm>

namespace maxem {

std::string to_string(InitMethod method) {
  return method == InitMethod::FusedLasso ? "fl" : "bs";
}

InitMethod parse_init_method(const std::string& name) {
  if (name == "bs") return InitMethod::BinarySegmentation;
  if (name == "fl") return InitMethod::FusedLasso;
  throw DataError("unknown initialization '" + name + "' (expected bs|fl)");
}

PipelineResult run_pipeline(const Dataset& data, const EmissionModel& model, Index segments,
                            const CandidatePool& pool, const PipelineOptions& opts) {
  SearchResult search = combination_search(data, model, segments, pool, opts.search);
  PipelineResult out;
  out.fit = std::move(search.best);
  out.pool = pool;
  out.runs = search.runs;
  out.bic = bic(out.fit, model);
  return out;
}

PipelineResult run_pipeline(const Dataset& data, const EmissionModel& model, Index segments,
                            const PipelineOptions& opts) {
  if (segments == 1) return run_pipeline(data, model, segments, CandidatePool{}, opts);
  const CandidatePool pool = opts.init == InitMethod::FusedLasso ? fl_candidates(data, model, segments, opts.fl)
                                                                 : bs_candidates(data, model, opts.bs);
  return run_pipeline(data, model, segments, pool, opts);
}

const SelectionEntry& SelectionReport::best() const {
  for (const auto& e : entries)
    if (e.segments == chosen) return e;
  throw std::logic_error("selection report has no entry for the chosen K");
}

SelectionReport select_k(const Dataset& data, const EmissionModel& model, Index k_min, Index k_max,
                         const PipelineOptions& opts) {
  if (k_min < 1 || k_max < k_min || k_max > data.size())
    throw DataError("K range must satisfy 1 <= k_min <= k_max <= n");
  SelectionReport report;
  // The binary-segmentation pool does not depend on K.
  CandidatePool bs_pool;
  const bool shared_pool = opts.init == InitMethod::BinarySegmentation && k_max > 1;
  if (shared_pool) bs_pool = bs_candidates(data, model, opts.bs);
  for (Index k = k_min; k <= k_max; ++k) {
    PipelineResult res = k == 1 || !shared_pool ? run_pipeline(data, model, k, opts)
                                                : run_pipeline(data, model, k, bs_pool, opts);
    report.entries.push_back({k, std::move(res.fit), res.bic, std::move(res.pool)});
  }
  const auto best = std::min_element(report.entries.begin(), report.entries.end(),
                                     [](const SelectionEntry& a, const SelectionEntry& b) { return a.bic < b.bic; });
  report.chosen = best->segments;
  return report;
}

}  // namespace maxem
