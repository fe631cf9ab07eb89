#include "maxem/cli.hpp"

#include "maxem/init.hpp"
#include "maxem/lrtest.hpp"
#include "maxem/oracle.hpp"
#include "maxem/parallel.hpp"
#include "maxem/rng.hpp"
#include "maxem/select.hpp"
#include "maxem/sim.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace maxem {

namespace {

using json = nlohmann::ordered_json;

enum class LogLevel { Off, Error, Warn, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("MAXEM_LOG");
  const std::string v = env ? env : "";
  if (v == "off") return LogLevel::Off;
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& msg) const { emit(LogLevel::Info, "info", msg); }
  void debug(const std::string& msg) const { emit(LogLevel::Debug, "debug", msg); }
  void warn(const std::string& msg) const { emit(LogLevel::Warn, "warning", msg); }

 private:
  void emit(LogLevel lvl, const char* tag, const std::string& msg) const {
    if (level_ >= lvl) err_ << "maxem: " << tag << ": " << msg << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

json theta_json(const Eigen::VectorXd& theta) {
  json arr = json::array();
  for (Index j = 0; j < theta.size(); ++j) arr.push_back(theta[j]);
  return arr;
}

json fit_json(const SegmentedFit& fit, const EmissionModel& model) {
  json thetas = json::array();
  for (const auto& t : fit.thetas) thetas.push_back(theta_json(t));
  return json{{"breakpoints", fit.segmentation.breakpoints()},
              {"theta_per_segment", thetas},
              {"loglik", fit.loglik},
              {"bic", bic(fit, model)},
              {"iterations", fit.iterations},
              {"converged", fit.converged},
              {"degenerate", fit.degenerate}};
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream file(path);
  if (!file) throw DataError("cannot write '" + path + "'");
  file << doc.dump(2) << '\n';
}

std::ofstream open_output(const std::string& path) {
  std::ofstream file(path);
  if (!file) throw DataError("cannot write '" + path + "'");
  return file;
}

std::vector<Index> parse_given(const std::string& spec) {
  std::vector<Index> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw DataError("--init given: '" + item + "' is not an integer");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

struct Common {
  std::string input;
  std::string model = "mean";
  std::string out;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool needs_input) {
  auto* in = cmd->add_option("--input", c.input, "CSV file; first column is the response (time,status for aft)");
  if (needs_input) in->required()->check(CLI::ExistingFile);
  cmd->add_option("--model", c.model, "mean|linear|logistic|poisson|aft")
      ->check(CLI::IsMember({"mean", "linear", "logistic", "poisson", "aft"}));
  cmd->add_option("--out", c.out, "write the JSON result here instead of stdout");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

struct Loaded {
  Dataset data;
  std::unique_ptr<EmissionModel> model;
};

Loaded load(const Common& c) {
  const ModelKind kind = parse_model_kind(c.model);
  Dataset data = load_csv(c.input, response_kind_for(kind));
  auto model = make_model(kind, data.num_covariates());
  model->check(data);
  return {std::move(data), std::move(model)};
}

// ---------------------------------------------------------------------------

int cmd_fit(const Common& c, Index k, const std::string& init, std::ostream& out, const Logger& log) {
  auto [data, model] = load(c);
  PipelineOptions opts;
  opts.search.threads = c.threads;
  PipelineResult res;
  if (init.rfind("given:", 0) == 0) {
    const Segmentation start(data.size(), parse_given(init.substr(6)));
    if (start.num_segments() != k)
      throw DataError("--init given lists " + std::to_string(start.num_segments() - 1) + " breakpoint(s) but --k " +
                      std::to_string(k) + " needs " + std::to_string(k - 1));
    res.fit = max_em(data, *model, start, opts.search.em);
    res.pool.source = PoolSource::Given;
    res.pool.candidates = start.breakpoints();
    res.runs = 1;
  } else {
    opts.init = parse_init_method(init);
    res = run_pipeline(data, *model, k, opts);
  }
  log.info("fit: " + std::to_string(res.runs) + " max-EM run(s) over a pool of " + std::to_string(res.pool.size()));
  json doc = fit_json(res.fit, *model);
  doc["init_pool"] = {{"source", to_string(res.pool.source)}, {"candidates", res.pool.candidates},
                      {"quota_met", res.pool.quota_met}};
  emit(doc, c.out, out);
  return 0;
}

int cmd_select(const Common& c, Index k_min, Index k_max, const std::string& init, const std::string& curve,
               std::ostream& out) {
  auto [data, model] = load(c);
  PipelineOptions opts;
  opts.init = parse_init_method(init);
  opts.search.threads = c.threads;
  const SelectionReport rep = select_k(data, *model, k_min, k_max, opts);
  json entries = json::array();
  for (const auto& e : rep.entries) {
    json row = fit_json(e.fit, *model);
    row["k"] = e.segments;
    row["bic"] = e.bic;
    entries.push_back(row);
  }
  emit(json{{"chosen_k", rep.chosen}, {"entries", entries}}, c.out, out);
  if (!curve.empty()) {
    auto file = open_output(curve);
    file << "K,BIC\n";
    for (const auto& e : rep.entries) file << e.segments << ',' << format_double(e.bic) << '\n';
  }
  return 0;
}

int cmd_test(const Common& c, Index permutations, Index t_low, const std::string& curve, std::ostream& out) {
  auto [data, model] = load(c);
  LrOptions opts;
  opts.t_low = t_low;
  const LrTestResult res = permutation_test(data, *model, permutations, c.seed, opts, c.threads);
  const json doc{{"T_n", res.curve.t_n},
                 {"n1_hat", res.curve.n1_hat},
                 {"p_value", res.permutation.p_value},
                 {"q95_null", res.permutation.q95},
                 {"B", res.permutation.replicates},
                 {"seed", res.permutation.seed}};
  emit(doc, c.out, out);
  if (!curve.empty()) {
    auto file = open_output(curve);
    write_curve_csv(file, res.curve);
  }
  return 0;
}

CsvSchema schema_for(const Scenario& sc, Index p) {
  CsvSchema schema;
  schema.kind = response_kind_for(sc.model);
  if (sc.model == ModelKind::WeibullAft) {
    schema.response = "time";
    schema.status = "status";
  }
  for (Index j = 1; j <= p; ++j) schema.covariates.push_back("x" + std::to_string(j));
  return schema;
}

int cmd_simulate(const std::string& preset, std::uint64_t seed, const std::string& path, std::ostream& out) {
  const Scenario sc = load_scenario(preset);
  const GeneratedSample sample = generate(sc, seed);
  const CsvSchema schema = schema_for(sc, sample.data.num_covariates());
  if (path.empty()) {
    write_csv(out, sample.data, schema);
  } else {
    save_csv(path, sample.data, schema);
  }
  return 0;
}

int cmd_replicate(const std::string& preset, Index J, const std::string& method, std::uint64_t seed,
                  unsigned threads, const std::string& json_path, const std::string& raw_path, std::ostream& out,
                  const Logger& log) {
  const Scenario sc = load_scenario(preset);
  if (J < 1) throw DataError("--j must be positive");
  const auto started = std::chrono::steady_clock::now();
  std::vector<SegmentedFit> fits(static_cast<std::size_t>(J));
  std::vector<std::string> errors(static_cast<std::size_t>(J));
  parallel_for(fits.size(), threads, [&](std::size_t r) {
    const GeneratedSample sample = generate(sc, replicate_seed(seed, r));
    const auto model = make_model(sc.model, sample.data.num_covariates());
    try {
      if (method == "brute") {
        fits[r] = brute_force(sample.data, *model, sc.segments());
      } else {
        PipelineOptions opts;
        opts.init = method == "maxem-fl" ? InitMethod::FusedLasso : InitMethod::BinarySegmentation;
        opts.search.threads = 1;
        fits[r] = run_pipeline(sample.data, *model, sc.segments(), opts).fit;
      }
    } catch (const DataError& e) {
      errors[r] = e.what();
    }
  });
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (!errors[r].empty()) throw DataError("replicate " + std::to_string(r) + ": " + errors[r]);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  log.info("replicate: " + std::to_string(J) + " replicate(s) in " + format_double(seconds) + " s");
  const MetricsReport rep = evaluate(sc, fits);
  const json doc{{"preset", sc.name},    {"method", method},       {"J", J},
                 {"seed", seed},         {"mse", rep.mse},         {"bias2", rep.bias2},
                 {"var", rep.var},       {"mape", rep.mape},       {"acce", rep.acce},
                 {"sigma_mse", rep.sigma_mse}, {"replicates", rep.replicates}, {"excluded", rep.excluded},
                 {"mape_skipped", rep.mape_skipped}};
  emit(doc, json_path, out);
  if (!raw_path.empty()) {
    auto file = open_output(raw_path);
    file << "replicate,seed,loglik,breakpoints,iterations,converged,degenerate\n";
    for (std::size_t r = 0; r < fits.size(); ++r) {
      std::string bps;
      for (Index b : fits[r].segmentation.breakpoints()) bps += (bps.empty() ? "" : ";") + std::to_string(b);
      file << r << ',' << replicate_seed(seed, r) << ',' << format_double(fits[r].loglik) << ',' << bps << ','
           << fits[r].iterations << ',' << fits[r].converged << ',' << fits[r].degenerate << '\n';
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Change-point detection by max-EM on ordered regression data"};
  app.name("maxem");
  app.require_subcommand(1, 1);
  const Logger log(err);

  Common fit_c, sel_c, test_c;
  Index fit_k = 1;
  std::string fit_init = "bs";
  auto* fit = app.add_subcommand("fit", "fit a K-segment model");
  add_common(fit, fit_c, true);
  fit->add_option("--k", fit_k, "number of segments")->required()->check(CLI::PositiveNumber);
  fit->add_option("--init", fit_init, "bs | fl | given:<i,j,...>");

  Index k_min = 1, k_max = 1;
  std::string sel_init = "bs", sel_curve;
  auto* sel = app.add_subcommand("select", "choose K by BIC");
  add_common(sel, sel_c, true);
  sel->add_option("--k-min", k_min, "smallest K")->required()->check(CLI::PositiveNumber);
  sel->add_option("--k-max", k_max, "largest K")->required()->check(CLI::PositiveNumber);
  sel->add_option("--init", sel_init, "bs | fl")->check(CLI::IsMember({"bs", "fl"}));
  sel->add_option("--curve", sel_curve, "write K,BIC rows to this CSV");

  Index perms = 1000, t_low = 100;
  std::string test_curve;
  auto* test = app.add_subcommand("test", "one-breakpoint likelihood-ratio test");
  add_common(test, test_c, true);
  test->add_option("--permutations", perms, "number of permutations B")->check(CLI::PositiveNumber);
  test->add_option("--t-low", t_low, "tail threshold for the small-sample approximation")->check(CLI::PositiveNumber);
  test->add_option("--curve", test_curve, "write n1,statistic,regime rows to this CSV");

  std::string sim_preset, sim_out;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "generate a dataset from a scenario preset");
  sim->add_option("--preset", sim_preset, "preset name or scenario file")->required();
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out", sim_out, "CSV path (stdout if omitted)");

  std::string rep_preset, rep_method = "maxem-bs", rep_out, rep_raw;
  Index rep_j = 100;
  std::uint64_t rep_seed = 1;
  unsigned rep_threads = 0;
  auto* rep = app.add_subcommand("replicate", "Monte Carlo replicates with metrics");
  rep->add_option("--preset", rep_preset, "preset name or scenario file")->required();
  rep->add_option("--j", rep_j, "number of replicates")->check(CLI::PositiveNumber);
  rep->add_option("--method", rep_method, "maxem-bs | maxem-fl | brute")
      ->check(CLI::IsMember({"maxem-bs", "maxem-fl", "brute"}));
  rep->add_option("--seed", rep_seed, "base seed; replicate r uses a derived stream");
  rep->add_option("--threads", rep_threads, "worker threads (0 = all cores)");
  rep->add_option("--out", rep_out, "write the metrics JSON here instead of stdout");
  rep->add_option("--raw", rep_raw, "write per-replicate results to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << '\n';
      return 0;
    }
    err << "maxem: error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*fit) return cmd_fit(fit_c, fit_k, fit_init, out, log);
    if (*sel) {
      if (k_max < k_min) throw DataError("--k-max must be at least --k-min");
      return cmd_select(sel_c, k_min, k_max, sel_init, sel_curve, out);
    }
    if (*test) return cmd_test(test_c, perms, t_low, test_curve, out);
    if (*sim) return cmd_simulate(sim_preset, sim_seed, sim_out, out);
    if (*rep) return cmd_replicate(rep_preset, rep_j, rep_method, rep_seed, rep_threads, rep_out, rep_raw, out, log);
  } catch (const std::exception& e) {
    err << "maxem: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace maxem
