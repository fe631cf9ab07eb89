#include "doctest.h"
#include "support.hpp"

#include "maxem/maxem.hpp"
#include "maxem/oracle.hpp"
#include "maxem/sim.hpp"

using namespace maxem;
using namespace maxem::testing;

namespace {

Segmentation random_segmentation(Rng& rng, Index n, Index K) {
  std::vector<Index> bps;
  while (static_cast<Index>(bps.size()) < K - 1) {
    const Index b = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (std::find(bps.begin(), bps.end(), b) == bps.end()) bps.push_back(b);
  }
  std::sort(bps.begin(), bps.end());
  return Segmentation(n, bps);
}

}  // namespace

TEST_SUITE("maxem") {

TEST_CASE("one segment is a single fit with no iterations") {
  Rng rng(1);
  const Dataset d = random_dataset(ModelKind::Linear, 50, 2, rng);
  const auto m = make_model(ModelKind::Linear, 2);
  const SegmentedFit f = max_em(d, *m, Segmentation::single(50));
  CHECK(f.iterations == 0);
  CHECK(f.segmentation.breakpoints().empty());
  const FitResult direct = m->fit(d, RowSet::range(0, 50));
  CHECK(f.loglik == doctest::Approx(direct.loglik).epsilon(1e-12));
  CHECK(evaluate_loglik(d, *m, f) == doctest::Approx(direct.loglik).epsilon(1e-12));
}

TEST_CASE("likelihood trace never decreases") {
  Rng rng(2);
  for (int rep = 0; rep < 60; ++rep) {
    const ModelKind kind = kAllModels[rep % 5];
    const Index K = 2 + rep % 2;
    const Index n = 60 + static_cast<Index>(rng.below(150));
    const Dataset d = random_dataset(kind, n, 2, rng, even_segmentation(n, K).breakpoints(), 1.0);
    const auto m = make_model(kind, d.num_covariates());
    const SegmentedFit f = max_em(d, *m, random_segmentation(rng, n, K));
    CAPTURE(to_string(kind));
    for (std::size_t t = 1; t < f.trace.size(); ++t) CHECK(f.trace[t] >= f.trace[t - 1] - 1e-9);
    CHECK(f.loglik >= f.trace.front() - 1e-9);
    CHECK(std::abs(f.loglik - evaluate_loglik(d, *m, f)) < 1e-10 * std::max(1.0, std::abs(f.loglik)));
  }
}

TEST_CASE("rerunning from the output is a fixed point") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset d = random_dataset(ModelKind::Mean, 120, 0, rng, {40, 80}, 1.5);
    const auto m = make_model(ModelKind::Mean, 0);
    const SegmentedFit f = max_em(d, *m, even_segmentation(120, 3));
    if (!f.converged) continue;
    const SegmentedFit g = max_em(d, *m, f.segmentation);
    CHECK(g.segmentation == f.segmentation);
    CHECK(g.iterations <= 1);
  }
}

TEST_CASE("converged fit equals the max lattice value") {
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset d = random_dataset(ModelKind::Linear, 100, 1, rng, {50}, 2.0);
    const auto m = make_model(ModelKind::Linear, 1);
    const SegmentedFit f = max_em(d, *m, Segmentation(100, {30}));
    REQUIRE(f.converged);
    if (max_em(d, *m, f.segmentation).segmentation != f.segmentation) continue;
    const LatticeScores mx = max_forward_backward(d, *m, f.thetas);
    const double lattice = mx.log_forward(99, 1) - 99 * std::log(0.5);
    CHECK(lattice == doctest::Approx(f.loglik).epsilon(1e-10));
  }
}

TEST_CASE("mean one-breakpoint sample reaches the brute-force breakpoint") {
  const Scenario sc = load_scenario("mean-1bp");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GeneratedSample s = generate(sc, seed);
    const auto m = make_model(ModelKind::Mean, 0);
    const SegmentedFit em = max_em(s.data, *m, Segmentation(500, {250}));
    const SegmentedFit bf = brute_force(s.data, *m, 2);
    CHECK(bf.loglik >= em.loglik - 1e-9);
    CHECK(em.segmentation == bf.segmentation);
  }
}

TEST_CASE("started at the brute-force solution, max-EM stays there") {
  Rng rng(6);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 20 + static_cast<Index>(rng.below(41));
    const Dataset d = random_dataset(ModelKind::Linear, n, 1, rng, {n / 2}, 1.5);
    const auto m = make_model(ModelKind::Linear, 1);
    const SegmentedFit bf = brute_force(d, *m, 2);
    if (bf.degenerate) continue;
    const SegmentedFit em = max_em(d, *m, bf.segmentation);
    CHECK(em.segmentation == bf.segmentation);
    CHECK(em.loglik == doctest::Approx(bf.loglik).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked >= 45);
}

TEST_CASE("splitting a segment never lowers the optimum") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset d = random_dataset(ModelKind::Linear, 80, 1, rng);
    const auto m = make_model(ModelKind::Linear, 1);
    const SegmentedFit a = fit_segmentation(d, *m, Segmentation(80, {40}));
    const SegmentedFit b = fit_segmentation(d, *m, Segmentation(80, {20, 40}));
    CHECK(b.loglik >= a.loglik - 1e-9);
  }
}

TEST_CASE("short segments are fitted with a ridge and flagged") {
  Rng rng(8);
  const Dataset d = random_dataset(ModelKind::Linear, 30, 2, rng);
  const auto m = make_model(ModelKind::Linear, 2);
  const SegmentedFit f = fit_segmentation(d, *m, Segmentation(30, {2}));
  CHECK(f.segment_degenerate[0]);
  CHECK_FALSE(f.segment_degenerate[1]);
  CHECK(f.degenerate);
  CHECK(std::isfinite(f.loglik));
}

TEST_CASE("bic definition") {
  CHECK(bic(-100.0, 3, 2, 50) == -2.0 * -100.0 + 6.0 * std::log(50.0));
  Rng rng(9);
  const Dataset d = random_dataset(ModelKind::Mean, 40, 0, rng);
  const auto m = make_model(ModelKind::Mean, 0);
  const SegmentedFit f = fit_segmentation(d, *m, Segmentation(40, {20}));
  CHECK(bic(f, *m) == -2.0 * f.loglik + 4.0 * std::log(40.0));
}

TEST_CASE("bad inputs") {
  const Dataset d = mean_data({1, 2, 3, 4});
  const auto m = make_model(ModelKind::Mean, 0);
  CHECK_THROWS_AS(max_em(d, *m, Segmentation(5, {2})), DataError);
  CHECK_THROWS_AS(even_segmentation(3, 4), DataError);
  CHECK(even_segmentation(10, 3).breakpoints() == std::vector<Index>{3, 6});
}

}  // TEST_SUITE
