#pragma once

#include "maxem/init.hpp"

#include <string>
#include <vector>

namespace maxem {

enum class InitMethod { BinarySegmentation, FusedLasso };

std::string to_string(InitMethod method);
InitMethod parse_init_method(const std::string& name);

struct PipelineOptions {
  InitMethod init = InitMethod::BinarySegmentation;
  BsOptions bs;
  FlOptions fl;
  SearchOptions search;
};

struct PipelineResult {
  SegmentedFit fit;
  CandidatePool pool;
  double bic = 0.0;
  std::size_t runs = 0;
};

/// Candidate pool followed by the combination search for K segments.
PipelineResult run_pipeline(const Dataset& data, const EmissionModel& model, Index segments,
                            const PipelineOptions& opts = {});
/// Same search over a pool built elsewhere.
PipelineResult run_pipeline(const Dataset& data, const EmissionModel& model, Index segments,
                            const CandidatePool& pool, const PipelineOptions& opts);

struct SelectionEntry {
  Index segments = 1;
  SegmentedFit fit;
  double bic = 0.0;
  CandidatePool pool;
};

struct SelectionReport {
  std::vector<SelectionEntry> entries;  // increasing K
  Index chosen = 1;

  const SelectionEntry& best() const;
};

/// BIC over K in [k_min, k_max]; the smallest BIC wins, ties go to the smaller K.
SelectionReport select_k(const Dataset& data, const EmissionModel& model, Index k_min, Index k_max,
                         const PipelineOptions& opts = {});

}  // namespace maxem
