#pragma once

#include "maxem/maxem.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace maxem {

enum class CovariateLaw { None, Uniform, Bernoulli };

/// Piecewise data-generating process. Coefficients per segment are
/// (intercept, effects...) on the natural scale; `sigma` holds the per-segment
/// noise scale for mean, linear and AFT models.
struct Scenario {
  std::string name;
  ModelKind model = ModelKind::Mean;
  Index n = 0;
  std::vector<Index> breakpoints;
  std::vector<std::vector<double>> coefficients;
  std::vector<double> sigma;
  CovariateLaw covariates = CovariateLaw::None;
  Index num_covariates = 0;
  double censor_rate = 0.0011;  // exponential censoring rate, AFT only

  Index segments() const { return static_cast<Index>(breakpoints.size()) + 1; }
  /// Throws DataError when dimensions or breakpoints are inconsistent.
  void validate() const;
  /// True parameters in the model's theta layout (log scale for sigma).
  std::vector<Eigen::VectorXd> true_thetas() const;
};

/// Key-value text, one `key = value` per line, '#' starts a comment:
///   name, model (mean|linear|logistic|poisson|aft), n,
///   breakpoints (comma list, may be empty), segment.<k> (comma list of
///   coefficients, k = 1..K), sigma (one value or one per segment),
///   covariates (none | uniform:<p> | bernoulli:<p>), censor_rate.
Scenario parse_scenario(const std::string& text);
std::string format_scenario(const Scenario& scenario);

struct PresetText {
  const char* name;
  const char* text;
};
const std::vector<PresetText>& bundled_presets();
std::vector<std::string> preset_names();
/// Bundled preset by name, or a scenario file when `name_or_path` is a readable path.
Scenario load_scenario(const std::string& name_or_path);

struct GeneratedSample {
  Dataset data;
  Segmentation truth;
};

/// Deterministic in (scenario, seed).
GeneratedSample generate(const Scenario& scenario, std::uint64_t seed);

/// Metric-scale parameters: coefficients for every model, with the AFT scale
/// inserted after the intercept (the order used by the scenario tables).
Eigen::VectorXd metric_parameters(ModelKind model, const Eigen::VectorXd& theta);

struct MetricsReport {
  double mse = 0.0;
  double bias2 = 0.0;
  double var = 0.0;
  double mape = 0.0;
  double acce = 0.0;
  double sigma_mse = 0.0;        // mean and linear models; 0 otherwise
  Index replicates = 0;          // replicates used
  Index excluded = 0;            // replicates with the wrong number of segments
  Index mape_skipped = 0;        // coordinates skipped because the truth is 0
};

/// MSE/BIAS^2/VAR/MAPE over the metric-scale parameters normalized by 1/(KJ)
/// (BIAS^2 by 1/K); ACCE is the misallocated fraction over all n J labels.
MetricsReport evaluate(const Scenario& scenario, const std::vector<SegmentedFit>& fits);

}  // namespace maxem
