#include "doctest.h"
#include "support.hpp"

#include "maxem/sim.hpp"

#include <cmath>

using namespace maxem;
using namespace maxem::testing;

namespace {

SegmentedFit truth_fit(const Scenario& sc) {
  SegmentedFit f;
  f.segmentation = Segmentation(sc.n, sc.breakpoints);
  f.thetas = sc.true_thetas();
  return f;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("every bundled preset parses and validates") {
  const auto names = preset_names();
  CHECK(names.size() >= 19);
  for (const auto& name : names) {
    CAPTURE(name);
    const Scenario sc = load_scenario(name);
    CHECK(sc.name == name);
    const auto thetas = sc.true_thetas();
    const auto m = make_model(sc.model, sc.model == ModelKind::Mean ? 0 : sc.num_covariates);
    for (const auto& t : thetas) CHECK(t.size() == m->dim());
    // format then parse is the identity
    const Scenario back = parse_scenario(format_scenario(sc));
    CHECK(back.breakpoints == sc.breakpoints);
    CHECK(back.coefficients == sc.coefficients);
    CHECK(back.sigma == sc.sigma);
    CHECK(back.censor_rate == sc.censor_rate);
  }
}

TEST_CASE("scenario text errors") {
  CHECK_THROWS_AS(parse_scenario("model = mean\nn = 10\nbreakpoints = 5\nsegment.1 = 1\nsigma = 1\n"), DataError);
  CHECK_THROWS_AS(parse_scenario("model = mean\nn = 10\nsegment.1 = 1\nsigma = 1\ncolour = red\n"), DataError);
  CHECK_THROWS_AS(parse_scenario("model = linear\nn = 10\nsegment.1 = 1, 2\nsigma = 1\ncovariates = uniform:2\n"),
                  DataError);
  CHECK_THROWS_AS(parse_scenario("model = logistic\nn = 10\nsegment.1 = 1\nsigma = 1\n"), DataError);
  CHECK_THROWS_WITH_AS(load_scenario("no-such-preset"), doctest::Contains("mean-1bp"), DataError);
  const Scenario sc = parse_scenario("# comment\nmodel = mean\nn = 10\nbreakpoints = 4\nsegment.1 = 1\nsegment.2 = 3\nsigma = 2\n");
  CHECK(sc.sigma == std::vector<double>{2.0, 2.0});
  CHECK(sc.segments() == 2);
}

TEST_CASE("generation is deterministic in the seed") {
  for (const auto& name : preset_names()) {
    const Scenario sc = load_scenario(name);
    const GeneratedSample a = generate(sc, 42), b = generate(sc, 42), c = generate(sc, 43);
    CHECK(a.data.responses() == b.data.responses());
    CHECK(a.data.covariates() == b.data.covariates());
    CHECK(a.data.events() == b.data.events());
    CHECK(a.data.responses() != c.data.responses());
    CHECK(a.truth.breakpoints() == sc.breakpoints);
  }
}

TEST_CASE("mean one-breakpoint segment means") {
  const Scenario sc = load_scenario("mean-1bp");
  const GeneratedSample s = generate(sc, 7);
  const double m1 = s.data.responses().head(345).mean();
  const double m2 = s.data.responses().tail(155).mean();
  CHECK(std::abs(m1 - 10.0) < 3.0 * 3.0 / std::sqrt(345.0));
  CHECK(std::abs(m2 - 12.0) < 3.0 * 3.0 / std::sqrt(155.0));
}

TEST_CASE("first moments across seeds") {
  const Scenario sc = load_scenario("linear-h0");
  double total = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) total += generate(sc, replicate_seed(1, static_cast<std::uint64_t>(r))).data.responses().mean();
  // E y = 1 + 11.4/2 + 0.6/2, sd of the mean over 40000 rows well below 0.05
  CHECK(std::abs(total / reps - 7.0) < 0.05);
}

TEST_CASE("survival censoring fraction") {
  const Scenario sc = load_scenario("aft-1bp");
  double censored = 0.0;
  for (int r = 0; r < 20; ++r) censored += 1.0 - generate(sc, replicate_seed(2, static_cast<std::uint64_t>(r))).data.events().mean();
  censored /= 20.0;
  CHECK(censored >= 0.30);
  CHECK(censored <= 0.40);

  // with a censoring mean of 10 time units nearly all long survival times are censored
  Scenario literal = sc;
  literal.censor_rate = 0.1;
  double lit = 0.0;
  for (int r = 0; r < 20; ++r) lit += 1.0 - generate(literal, replicate_seed(2, static_cast<std::uint64_t>(r))).data.events().mean();
  CHECK(lit / 20.0 == doctest::Approx(0.86).epsilon(0.03));
}

TEST_CASE("binary covariate mean") {
  const GeneratedSample s = generate(load_scenario("logistic-1bp"), 9);
  const double m = s.data.covariates().col(0).mean();
  CHECK(m >= 0.45);
  CHECK(m <= 0.55);
  for (Index i = 0; i < 1000; ++i) CHECK((s.data.covariates()(i, 0) == 0.0 || s.data.covariates()(i, 0) == 1.0));
}

TEST_CASE("metric parameters") {
  const Eigen::Vector4d aft(2.0, 3.0, 4.2, std::log(1.7));
  const Eigen::VectorXd m = metric_parameters(ModelKind::WeibullAft, aft);
  REQUIRE(m.size() == 4);
  CHECK(m[0] == 2.0);
  CHECK(m[1] == doctest::Approx(1.7));
  CHECK(m[2] == 3.0);
  CHECK(m[3] == 4.2);
  CHECK(metric_parameters(ModelKind::Linear, Eigen::Vector3d(1, 2, 0.5)).size() == 2);
  CHECK(metric_parameters(ModelKind::Logistic, Eigen::Vector2d(1, 2)).size() == 2);
}

TEST_CASE("exact fits give zero metrics") {
  for (const char* name : {"mean-5bp", "linear-2bp", "aft-2bp", "logistic-1bp"}) {
    const Scenario sc = load_scenario(name);
    const std::vector<SegmentedFit> fits(3, truth_fit(sc));
    const MetricsReport r = evaluate(sc, fits);
    CHECK(r.mse == 0.0);
    // averaging identical replicates can leave rounding residue
    CHECK(r.bias2 < 1e-24);
    CHECK(r.var < 1e-24);
    CHECK(r.mape == 0.0);
    CHECK(r.acce == 0.0);
    CHECK(r.replicates == 3);
  }
}

TEST_CASE("single replicate has no variance") {
  const Scenario sc = load_scenario("linear-1bp");
  SegmentedFit f = truth_fit(sc);
  f.thetas[0][1] += 0.3;
  f.segmentation = Segmentation(sc.n, {560});
  const MetricsReport r = evaluate(sc, {f});
  CHECK(r.var == 0.0);
  CHECK(r.mse == doctest::Approx(r.bias2).epsilon(1e-14));
  CHECK(r.mse == doctest::Approx(0.09 / 2.0));
  CHECK(r.acce == doctest::Approx(7.0 / 1000.0));
}

TEST_CASE("bias-variance identity and exclusions") {
  const Scenario sc = load_scenario("aft-1bp");
  Rng rng(3);
  std::vector<SegmentedFit> fits;
  for (int j = 0; j < 25; ++j) {
    SegmentedFit f = truth_fit(sc);
    for (auto& t : f.thetas)
      for (Index l = 0; l < t.size(); ++l) t[l] += 0.2 * rng.normal() + 0.05;
    f.segmentation = Segmentation(sc.n, {660 + static_cast<Index>(rng.below(13))});
    fits.push_back(f);
  }
  SegmentedFit wrong = truth_fit(sc);
  wrong.segmentation = Segmentation(sc.n, {300, 666});
  wrong.thetas.push_back(wrong.thetas.back());
  fits.push_back(wrong);
  const MetricsReport r = evaluate(sc, fits);
  CHECK(r.excluded == 1);
  CHECK(r.replicates == 25);
  CHECK(std::abs(r.mse - (r.bias2 + r.var)) <= 1e-8 * r.mse);
  CHECK(r.acce > 0.0);
  CHECK(r.mape > 0.0);
}

TEST_CASE("zero true coordinates are skipped in MAPE") {
  Scenario sc = parse_scenario("model = linear\nn = 100\nbreakpoints = 50\nsegment.1 = 0, 1\nsegment.2 = 1, 0\nsigma = 1\ncovariates = uniform:1\n");
  SegmentedFit f = truth_fit(sc);
  f.thetas[0][1] = 1.5;
  const MetricsReport r = evaluate(sc, {f});
  CHECK(r.mape_skipped == 2);
  CHECK(r.mape == doctest::Approx(0.5 / 2.0));
  CHECK(std::isfinite(r.mape));
}

}  // TEST_SUITE
