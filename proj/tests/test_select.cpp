#include "doctest.h"
#include "support.hpp"

#include "maxem/oracle.hpp"
#include "maxem/select.hpp"
#include "maxem/sim.hpp"

using namespace maxem;
using namespace maxem::testing;

TEST_SUITE("select") {

TEST_CASE("init method names") {
  CHECK(parse_init_method("bs") == InitMethod::BinarySegmentation);
  CHECK(parse_init_method("fl") == InitMethod::FusedLasso);
  CHECK(to_string(InitMethod::FusedLasso) == "fl");
  CHECK_THROWS_AS(parse_init_method("random"), DataError);
}

TEST_CASE("pure noise selects one segment") {
  // the long-run rate is about 0.85 on n = 500, so this threshold sits near the edge
  const Scenario sc = load_scenario("mean-h0");
  const auto m = make_model(ModelKind::Mean, 0);
  int ones = 0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const GeneratedSample s = generate(sc, replicate_seed(3, static_cast<std::uint64_t>(r)));
    ones += select_k(s.data, *m, 1, 3).chosen == 1;
  }
  CHECK(ones >= 45);
}

TEST_CASE("five-breakpoint mean data selects six segments" * doctest::test_suite("select_slow")) {
  // per-segment scales make K=7 win about a third of the time, so a majority needs a few dozen replicates
  const Scenario sc = load_scenario("mean-5bp");
  const auto m = make_model(ModelKind::Mean, 0);
  int six = 0;
  const int reps = 30;
  for (int r = 0; r < reps; ++r) {
    const GeneratedSample s = generate(sc, replicate_seed(4, static_cast<std::uint64_t>(r)));
    six += select_k(s.data, *m, 5, 7).chosen == 6;
  }
  CHECK(2 * six > reps);
}

TEST_CASE("piecewise-linear data with five breakpoints") {
  const Index n = 600;
  Rng rng(5);
  Eigen::VectorXd y(n);
  RowMatrix x(n, 1);
  const double slopes[] = {2.0, -1.0, 3.0, 0.0, -2.5, 1.5};
  const double levels[] = {0.0, 4.0, -2.0, 5.0, 1.0, 6.0};
  for (Index i = 0; i < n; ++i) {
    const Index k = i / 100;
    x(i, 0) = rng.uniform();
    y[i] = levels[k] + slopes[k] * x(i, 0) + 0.7 * rng.normal();
  }
  const Dataset d(ResponseKind::Continuous, y, x);
  const auto m = make_model(ModelKind::Linear, 1);
  const SelectionReport rep = select_k(d, *m, 5, 7);
  CHECK(rep.chosen == 6);
  CHECK(rep.best().fit.segmentation.breakpoints() == std::vector<Index>{100, 200, 300, 400, 500});
}

TEST_CASE("stored bic is recomputable and minimal") {
  Rng rng(6);
  const Dataset d = random_dataset(ModelKind::Linear, 300, 1, rng, {150}, 1.0);
  const auto m = make_model(ModelKind::Linear, 1);
  const SelectionReport rep = select_k(d, *m, 1, 3);
  REQUIRE(rep.entries.size() == 3);
  for (const auto& e : rep.entries) {
    CHECK(e.bic == bic(e.fit.loglik, m->dim(), e.segments, 300));
    CHECK(rep.best().bic <= e.bic);
  }
  CHECK(rep.entries.front().segments == 1);
  CHECK(rep.best().segments == rep.chosen);
}

TEST_CASE("exact optimum is non-decreasing in K") {
  Rng rng(7);
  for (int r = 0; r < 10; ++r) {
    const Dataset d = random_dataset(ModelKind::Mean, 40, 0, rng, {20}, 1.0);
    const auto m = make_model(ModelKind::Mean, 0);
    double prev = -INFINITY;
    for (Index K = 1; K <= 3; ++K) {
      const double l = brute_force(d, *m, K).loglik;
      CHECK(l >= prev - 1e-9);
      prev = l;
    }
  }
}

TEST_CASE("pipeline with a given pool and the fused-lasso pool") {
  const GeneratedSample s = generate(load_scenario("mean-1bp"), 9);
  const auto m = make_model(ModelKind::Mean, 0);
  PipelineOptions opts;
  opts.init = InitMethod::FusedLasso;
  const PipelineResult fl = run_pipeline(s.data, *m, 2, opts);
  CHECK(fl.pool.source == PoolSource::FusedLasso);
  CHECK(fl.bic == bic(fl.fit, *m));
  const PipelineResult bs = run_pipeline(s.data, *m, 2);
  CHECK(bs.pool.source == PoolSource::BinarySegmentation);
  CHECK(bs.runs == static_cast<std::size_t>(bs.pool.size()));
  CHECK_THROWS_AS(select_k(s.data, *m, 3, 2), DataError);
}

}  // TEST_SUITE
