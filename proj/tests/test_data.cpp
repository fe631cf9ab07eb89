#include "doctest.h"
#include "support.hpp"

#include "maxem/data.hpp"

#include <set>
#include <sstream>

using namespace maxem;

TEST_SUITE("data") {

TEST_CASE("csv with a response and one covariate loads as given") {
  std::istringstream in("y,x1\n1.5,0\n2,1\n-3,2\n4e-1,3\n");
  const auto header = read_csv_header(in);
  in.clear();
  in.seekg(0);
  const Dataset d = read_csv(in, CsvSchema::from_header(ResponseKind::Continuous, header));
  CHECK(d.size() == 4);
  CHECK(d.num_covariates() == 1);
  CHECK(d.response(0) == 1.5);
  CHECK(d.response(3) == 0.4);
  CHECK(d.covariates()(2, 0) == 2.0);
}

TEST_CASE("binary value outside {0,1} names the offending row") {
  std::istringstream in("y,x1\n0,1\n1,2\n2,3\n");
  CsvSchema schema{ResponseKind::Binary, "y", "", {"x1"}};
  try {
    (void)read_csv(in, schema);
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("malformed inputs are rejected") {
  CsvSchema cont{ResponseKind::Continuous, "y", "", {"x1"}};
  std::istringstream missing("y,z\n1,2\n3,4\n");
  CHECK_THROWS_AS(read_csv(missing, cont), DataError);
  std::istringstream text("y,x1\n1,2\nabc,4\n");
  CHECK_THROWS_WITH_AS(read_csv(text, cont), doctest::Contains("row 2"), DataError);
  std::istringstream empty_cell("y,x1\n1,2\n,4\n");
  CHECK_THROWS_AS(read_csv(empty_cell, cont), DataError);
  CsvSchema surv{ResponseKind::CensoredTime, "time", "status", {}};
  std::istringstream nonpos("time,status\n1,1\n0,1\n");
  CHECK_THROWS_WITH_AS(read_csv(nonpos, surv), doctest::Contains("row 2"), DataError);
  CsvSchema count{ResponseKind::Count, "y", "", {}};
  std::istringstream frac("y\n1\n2.5\n");
  CHECK_THROWS_AS(read_csv(frac, count), DataError);
}

TEST_CASE("censored time csv carries the event indicator") {
  std::istringstream in("time,status,x1,x2\n1.2,1,0.1,0.2\n3.4,0,0.3,0.4\n0.5,1,0.5,0.6\n");
  const auto header = read_csv_header(in);
  in.clear();
  in.seekg(0);
  const Dataset d = read_csv(in, CsvSchema::from_header(ResponseKind::CensoredTime, header));
  CHECK(d.size() == 3);
  CHECK(d.num_covariates() == 2);
  CHECK(d.events().size() == 3);
  CHECK(d.event(1) == 0.0);
  CHECK(d.event(2) == 1.0);
  CHECK(d.response(1) == 3.4);
}

TEST_CASE("segment members follow the breakpoint definition") {
  const Segmentation a(10, {4});
  CHECK(segment_members(a, 1) == IndexRange{1, 4});
  CHECK(segment_members(a, 2) == IndexRange{5, 10});
  const Segmentation b(6, {2, 4});
  CHECK(segment_members(b, 2) == IndexRange{3, 4});
  CHECK_THROWS_AS(segment_members(b, 0), std::out_of_range);
  CHECK_THROWS_AS(segment_members(b, 4), std::out_of_range);
}

TEST_CASE("segments partition 1..n") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(40));
    std::set<Index> chosen;
    const Index K = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(n, 6))));
    while (static_cast<Index>(chosen.size()) < K - 1) chosen.insert(1 + static_cast<Index>(rng.below(n - 1)));
    const Segmentation seg(n, std::vector<Index>(chosen.begin(), chosen.end()));
    Index next = 1;
    for (Index k = 1; k <= seg.num_segments(); ++k) {
      const IndexRange r = segment_members(seg, k);
      REQUIRE(r.first == next);
      REQUIRE(r.size() >= 1);
      next = r.last + 1;
    }
    CHECK(next == n + 1);
    CHECK(Segmentation::from_labels(seg.labels()) == seg);
  }
}

TEST_CASE("invalid segmentations are rejected") {
  CHECK_THROWS_AS(Segmentation(10, {0}), DataError);
  CHECK_THROWS_AS(Segmentation(10, {10}), DataError);
  CHECK_THROWS_AS(Segmentation(10, {5, 5}), DataError);
  CHECK_THROWS_AS(Segmentation(10, {6, 3}), DataError);
  const std::vector<int> jump{0, 0, 2};
  CHECK_THROWS_AS(Segmentation::from_labels(jump), DataError);
}

TEST_CASE("csv round trip is bit exact") {
  Rng rng(5);
  const Index n = 50;
  Eigen::VectorXd y(n), ev(n);
  RowMatrix x(n, 2);
  for (Index i = 0; i < n; ++i) {
    y[i] = std::exp(3.0 * rng.normal());
    ev[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x(i, 0) = rng.normal() * 1e-7;
    x(i, 1) = rng.normal() * 1e9;
  }
  const Dataset d(ResponseKind::CensoredTime, y, x, ev);
  const CsvSchema schema{ResponseKind::CensoredTime, "time", "status", {"a", "b"}};
  std::stringstream buf;
  write_csv(buf, d, schema);
  const Dataset back = read_csv(buf, schema);
  CHECK(back.responses() == d.responses());
  CHECK(back.events() == d.events());
  CHECK(back.covariates() == d.covariates());
}

TEST_CASE("datasets need two finite rows") {
  CHECK_THROWS_AS(Dataset(ResponseKind::Continuous, Eigen::VectorXd::Zero(1), RowMatrix(1, 0)), DataError);
  RowMatrix x(2, 1);
  x << 1.0, NAN;
  CHECK_THROWS_AS(Dataset(ResponseKind::Continuous, Eigen::VectorXd::Zero(2), x), DataError);
}

}  // TEST_SUITE
