#include "maxem/sim.hpp"

#include "maxem/rng.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace maxem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError("scenario key '" + key + "': '" + item + "' is not a number");
    }
  }
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t j = 0; j < values.size(); ++j) out += (j ? ", " : "") + format_double(values[j]);
  return out;
}

bool has_sigma(ModelKind m) { return m == ModelKind::Mean || m == ModelKind::Linear || m == ModelKind::WeibullAft; }

}  // namespace

void Scenario::validate() const {
  auto fail = [&](const std::string& what) { throw DataError("scenario '" + name + "': " + what); };
  if (n < 2) fail("n must be at least 2");
  Index prev = 0;
  for (Index bp : breakpoints) {
    if (bp <= prev || bp >= n) fail("breakpoints must be strictly increasing within 1..n-1");
    prev = bp;
  }
  const Index K = segments();
  if (static_cast<Index>(coefficients.size()) != K)
    fail("expected " + std::to_string(K) + " segment coefficient lists, got " + std::to_string(coefficients.size()));
  const Index p = model == ModelKind::Mean ? 0 : num_covariates;
  if (model == ModelKind::Mean && covariates != CovariateLaw::None) fail("the mean model takes no covariates");
  if (model != ModelKind::Mean && p > 0 && covariates == CovariateLaw::None) fail("covariate law missing");
  for (const auto& c : coefficients)
    if (static_cast<Index>(c.size()) != p + 1)
      fail("each segment needs " + std::to_string(p + 1) + " coefficient(s)");
  if (has_sigma(model)) {
    if (static_cast<Index>(sigma.size()) != K) fail("sigma needs one value per segment");
    for (double s : sigma)
      if (!(s > 0.0)) fail("sigma must be positive");
  } else if (!sigma.empty()) {
    fail("sigma is not a parameter of the " + to_string(model) + " model");
  }
  if (model == ModelKind::WeibullAft && !(censor_rate >= 0.0)) fail("censor_rate must be non-negative");
}

std::vector<Eigen::VectorXd> Scenario::true_thetas() const {
  std::vector<Eigen::VectorXd> out;
  for (Index k = 0; k < segments(); ++k) {
    const auto& c = coefficients[static_cast<std::size_t>(k)];
    const Index q = static_cast<Index>(c.size());
    Eigen::VectorXd t(q + (has_sigma(model) ? 1 : 0));
    for (Index j = 0; j < q; ++j) t[j] = c[static_cast<std::size_t>(j)];
    if (has_sigma(model)) t[q] = std::log(sigma[static_cast<std::size_t>(k)]);
    out.push_back(std::move(t));
  }
  return out;
}

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::map<Index, std::vector<double>> segs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_n = false;
  bool have_model = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("scenario line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      sc.name = value;
    } else if (key == "model") {
      sc.model = parse_model_kind(value);
      have_model = true;
    } else if (key == "n") {
      const auto v = parse_list(key, value);
      if (v.size() != 1 || v[0] != std::floor(v[0])) throw DataError("scenario key 'n' must be an integer");
      sc.n = static_cast<Index>(v[0]);
      have_n = true;
    } else if (key == "breakpoints") {
      for (double b : parse_list(key, value)) sc.breakpoints.push_back(static_cast<Index>(b));
    } else if (key.rfind("segment.", 0) == 0) {
      const auto idx = parse_list(key, key.substr(8));
      if (idx.size() != 1 || idx[0] < 1) throw DataError("scenario key '" + key + "': bad segment index");
      segs[static_cast<Index>(idx[0])] = parse_list(key, value);
    } else if (key == "sigma") {
      sc.sigma = parse_list(key, value);
    } else if (key == "covariates") {
      const auto colon = value.find(':');
      const std::string law = trim(value.substr(0, colon));
      if (law == "none") {
        sc.covariates = CovariateLaw::None;
      } else if (law == "uniform" || law == "bernoulli") {
        sc.covariates = law == "uniform" ? CovariateLaw::Uniform : CovariateLaw::Bernoulli;
        const auto p = colon == std::string::npos ? std::vector<double>{1.0} : parse_list(key, value.substr(colon + 1));
        if (p.size() != 1 || p[0] < 1) throw DataError("scenario key 'covariates': bad covariate count");
        sc.num_covariates = static_cast<Index>(p[0]);
      } else {
        throw DataError("scenario key 'covariates': unknown law '" + law + "' (none|uniform:<p>|bernoulli:<p>)");
      }
    } else if (key == "censor_rate") {
      const auto v = parse_list(key, value);
      if (v.size() != 1) throw DataError("scenario key 'censor_rate' takes one value");
      sc.censor_rate = v[0];
    } else {
      throw DataError("scenario line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!have_model || !have_n) throw DataError("scenario needs at least 'model' and 'n'");
  for (Index k = 1; k <= static_cast<Index>(segs.size()); ++k) {
    auto it = segs.find(k);
    if (it == segs.end()) throw DataError("scenario is missing segment." + std::to_string(k));
    sc.coefficients.push_back(it->second);
  }
  if (has_sigma(sc.model) && sc.sigma.size() == 1 && sc.segments() > 1)
    sc.sigma.assign(static_cast<std::size_t>(sc.segments()), sc.sigma[0]);
  sc.validate();
  return sc;
}

std::string format_scenario(const Scenario& sc) {
  std::ostringstream out;
  if (!sc.name.empty()) out << "name = " << sc.name << '\n';
  out << "model = " << to_string(sc.model) << '\n';
  out << "n = " << sc.n << '\n';
  out << "breakpoints = ";
  for (std::size_t j = 0; j < sc.breakpoints.size(); ++j) out << (j ? ", " : "") << sc.breakpoints[j];
  out << '\n';
  for (std::size_t k = 0; k < sc.coefficients.size(); ++k) out << "segment." << k + 1 << " = " << join(sc.coefficients[k]) << '\n';
  if (!sc.sigma.empty()) out << "sigma = " << join(sc.sigma) << '\n';
  switch (sc.covariates) {
    case CovariateLaw::None: out << "covariates = none\n"; break;
    case CovariateLaw::Uniform: out << "covariates = uniform:" << sc.num_covariates << '\n'; break;
    case CovariateLaw::Bernoulli: out << "covariates = bernoulli:" << sc.num_covariates << '\n'; break;
  }
  if (sc.model == ModelKind::WeibullAft) out << "censor_rate = " << format_double(sc.censor_rate) << '\n';
  return out.str();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : bundled_presets()) out.emplace_back(p.name);
  return out;
}

Scenario load_scenario(const std::string& name_or_path) {
  for (const auto& p : bundled_presets()) {
    if (name_or_path == p.name) {
      Scenario sc = parse_scenario(p.text);
      if (sc.name.empty()) sc.name = p.name;
      return sc;
    }
  }
  std::ifstream in(name_or_path);
  if (!in) {
    std::string names;
    for (const auto& p : bundled_presets()) names += std::string(names.empty() ? "" : ", ") + p.name;
    throw DataError("unknown preset '" + name_or_path + "'; available presets: " + names);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario sc = parse_scenario(buf.str());
  if (sc.name.empty()) sc.name = name_or_path;
  return sc;
}

GeneratedSample generate(const Scenario& sc, std::uint64_t seed) {
  sc.validate();
  const Index n = sc.n;
  const Index p = sc.model == ModelKind::Mean ? 0 : sc.num_covariates;
  Rng rng(seed);
  const Segmentation truth(n, sc.breakpoints);
  Eigen::VectorXd y(n);
  Eigen::VectorXd events;
  if (sc.model == ModelKind::WeibullAft) events.resize(n);
  RowMatrix x(n, p);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    while (i >= truth.end(k)) ++k;
    const auto& c = sc.coefficients[static_cast<std::size_t>(k)];
    double eta = c[0];
    for (Index j = 0; j < p; ++j) {
      x(i, j) = sc.covariates == CovariateLaw::Bernoulli ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.uniform();
      eta += c[static_cast<std::size_t>(j + 1)] * x(i, j);
    }
    const double sigma = sc.sigma.empty() ? 1.0 : sc.sigma[static_cast<std::size_t>(k)];
    switch (sc.model) {
      case ModelKind::Mean:
      case ModelKind::Linear: y[i] = eta + sigma * rng.normal(); break;
      case ModelKind::Logistic: y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0; break;
      case ModelKind::Poisson: y[i] = static_cast<double>(rng.poisson(std::exp(eta))); break;
      case ModelKind::WeibullAft: {
        // eps = log E with E ~ Exp(1) has density exp(w - exp(w))
        const double t = std::exp(eta + sigma * std::log(rng.exponential(1.0)));
        const double c_time = sc.censor_rate > 0.0 ? rng.exponential(sc.censor_rate)
                                                   : std::numeric_limits<double>::infinity();
        y[i] = std::max(std::min(t, c_time), std::numeric_limits<double>::min());
        events[i] = t <= c_time ? 1.0 : 0.0;
        break;
      }
    }
  }
  return {Dataset(response_kind_for(sc.model), std::move(y), std::move(x), std::move(events)), truth};
}

Eigen::VectorXd metric_parameters(ModelKind model, const Eigen::VectorXd& theta) {
  switch (model) {
    case ModelKind::Mean:
    case ModelKind::Linear: return theta.head(theta.size() - 1);
    case ModelKind::Logistic:
    case ModelKind::Poisson: return theta;
    case ModelKind::WeibullAft: {
      const Index q = theta.size() - 1;
      Eigen::VectorXd out(theta.size());
      out[0] = theta[0];
      out[1] = std::exp(theta[q]);
      out.tail(q - 1) = theta.segment(1, q - 1);
      return out;
    }
  }
  return theta;
}

MetricsReport evaluate(const Scenario& sc, const std::vector<SegmentedFit>& fits) {
  MetricsReport rep;
  const Index K = sc.segments();
  const auto truth_theta = sc.true_thetas();
  std::vector<Eigen::VectorXd> star;
  for (const auto& t : truth_theta) star.push_back(metric_parameters(sc.model, t));
  const std::vector<int> truth_labels = Segmentation(sc.n, sc.breakpoints).labels();
  const bool sigma_metric = sc.model == ModelKind::Mean || sc.model == ModelKind::Linear;

  std::vector<const SegmentedFit*> used;
  for (const auto& f : fits) {
    if (f.num_segments() != K || f.segmentation.length() != sc.n) {
      ++rep.excluded;
      continue;
    }
    used.push_back(&f);
  }
  const Index J = static_cast<Index>(used.size());
  rep.replicates = J;
  if (J == 0) return rep;
  const double KJ = static_cast<double>(K * J);

  std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) mean[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(star[static_cast<std::size_t>(k)].size());
  Index wrong = 0;
  for (const SegmentedFit* f : used) {
    for (Index k = 0; k < K; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::VectorXd est = metric_parameters(sc.model, f->thetas[ks]);
      const Eigen::VectorXd diff = est - star[ks];
      mean[ks] += est / static_cast<double>(J);
      rep.mse += diff.squaredNorm();
      for (Index l = 0; l < diff.size(); ++l) {
        if (std::abs(star[ks][l]) < 1e-12) {
          ++rep.mape_skipped;
          continue;
        }
        rep.mape += std::abs(diff[l] / star[ks][l]);
      }
      if (sigma_metric) {
        const double s_hat = std::exp(f->thetas[ks][f->thetas[ks].size() - 1]);
        rep.sigma_mse += (s_hat - sc.sigma[ks]) * (s_hat - sc.sigma[ks]);
      }
    }
    const auto labels = f->segmentation.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != truth_labels[i];
  }
  rep.mse /= KJ;
  rep.mape /= KJ;
  rep.sigma_mse /= KJ;
  for (Index k = 0; k < K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    rep.bias2 += (mean[ks] - star[ks]).squaredNorm();
    for (const SegmentedFit* f : used)
      rep.var += (metric_parameters(sc.model, f->thetas[ks]) - mean[ks]).squaredNorm();
  }
  rep.bias2 /= static_cast<double>(K);
  rep.var /= KJ;
  rep.acce = static_cast<double>(wrong) / (static_cast<double>(sc.n) * static_cast<double>(J));
  return rep;
}

}  // namespace maxem
