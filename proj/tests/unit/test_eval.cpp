#include <cmath>

#include "helpers.hpp"
#include "lwf/eval/metrics.hpp"

using namespace lwf;
using namespace lwf::eval;

namespace {

RMatrix make(std::vector<std::vector<double>> rows) {
  RMatrix r(rows.size());
  for (auto& row : rows) r.push_row(row);
  return r;
}

RMatrix three() { return make({{.9}, {.6, .8}, {.5, .7, .8}}); }

}  // namespace

TEST_CASE("acc_final") {
  CHECK(std::abs(acc_final(make({{0.9}, {0.8, 0.9}})) - 85.0) < 1e-9);
  CHECK(std::abs(acc_final(make({{0.7}})) - 70.0) < 1e-9);
  CHECK(std::abs(acc_final(make({{0.3}, {0.3, 0.3}, {0.3, 0.3, 0.3}})) - 30.0) < 1e-9);
  RMatrix partial(3);
  partial.push_row({0.5});
  CHECK_ERROR_KIND(acc_final(partial), ErrorKind::state);
}

TEST_CASE("bwt_final") {
  CHECK(std::abs(bwt_final(make({{1.0}, {0.8, 0.5}})) + 20.0) < 1e-9);
  CHECK(std::abs(bwt_final(make({{0.6}, {0.6, 0.9}, {0.6, 0.9, 0.4}}))) < 1e-9);
  CHECK_ERROR_KIND(bwt_final(make({{0.7}})), ErrorKind::metric);
  try {
    bwt_final(make({{0.7}}));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("undefined-metric") != std::string::npos);
  }
}

TEST_CASE("curves on the hand 3x3 matrix") {
  const auto c = curves(three());
  REQUIRE(c.acc.size() == 3);
  CHECK(std::abs(c.acc[0] - 90.0) < 1e-9);
  CHECK(std::abs(c.acc[1] - 70.0) < 1e-9);
  CHECK(std::abs(c.acc[2] - 200.0 / 3.0) < 1e-9);
  CHECK(!c.bwt[0].has_value());
  CHECK(std::abs(*c.bwt[1] + 30.0) < 1e-9);
  CHECK(std::abs(*c.bwt[2] + 25.0) < 1e-9);
  CHECK(c.acc.back() == acc_final(three()));
  CHECK(*c.bwt.back() == bwt_final(three()));
}

TEST_CASE("a perfect learner and a frozen learner") {
  const auto p = curves(make({{1}, {1, 1}, {1, 1, 1}, {1, 1, 1, 1}}));
  for (double a : p.acc) CHECK(a == 100.0);
  for (std::size_t t = 1; t < 4; ++t) CHECK(*p.bwt[t] == 0.0);
  // frozen after each task: old accuracies never move
  const auto f = make({{0.7}, {0.7, 0.4}, {0.7, 0.4, 0.9}});
  CHECK(bwt_final(f) == 0.0);
}

TEST_CASE("prefix metrics ignore later rows") {
  auto a = make({{.9}, {.6, .8}, {.5, .7, .8}});
  auto b = make({{.9}, {.6, .8}, {.1, .2, .3}});
  CHECK(acc_final(a.prefix(2)) == acc_final(b.prefix(2)));
  CHECK(bwt_final(a.prefix(2)) == bwt_final(b.prefix(2)));
  CHECK(curves(a).acc[1] == curves(b).acc[1]);
}

TEST_CASE("rmatrix rows must arrive in order with valid accuracies") {
  RMatrix r(2);
  CHECK_ERROR_KIND(r.push_row({0.5, 0.5}), ErrorKind::state);
  CHECK_ERROR_KIND(r.push_row({1.5}), ErrorKind::state);
  r.push_row({0.5});
  r.push_row({0.5, 0.6});
  CHECK(r.complete());
  CHECK_ERROR_KIND(r.push_row({0.5, 0.5, 0.5}), ErrorKind::state);
}

TEST_CASE("aggregate across seeds") {
  const auto s = mean_std({60, 62, 64, 61, 63});
  CHECK(s.mean == 62.0);
  CHECK(s.std == doctest::Approx(1.58).epsilon(0.005));
  CHECK(s.std == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
  CHECK(!s.single);
  const auto one = mean_std({3.0});
  CHECK(one.std == 0.0);
  CHECK(one.single);

  std::vector<RunRecord> runs{{"d1", 1, three()}, {"d1", 2, three()}};
  const auto agg = aggregate(runs);
  CHECK(agg.runs == 2);
  CHECK(agg.acc.std == 0.0);
  CHECK(agg.bwt->std == 0.0);
  CHECK(agg.acc.mean == acc_final(three()));
  REQUIRE(agg.acc_curve.size() == 3);
  CHECK(!agg.bwt_curve[0].has_value());
  CHECK(agg.bwt_curve[2]->mean == doctest::Approx(-25.0));

  runs.push_back({"d2", 3, three()});
  CHECK_ERROR_KIND(aggregate(runs), ErrorKind::aggregation);
  std::vector<RunRecord> mixed{{"d1", 1, three()}, {"d1", 2, make({{0.5}})}};
  CHECK_ERROR_KIND(aggregate(mixed), ErrorKind::aggregation);
  CHECK_ERROR_KIND(aggregate({}), ErrorKind::aggregation);

  const auto single = aggregate({{"d", 1, make({{0.4}})}});
  CHECK(!single.bwt.has_value());
  CHECK(single.acc.single);
}

TEST_CASE("metrics do not depend on class labels inside a task") {
  // R only records accuracies; relabelling classes leaves every entry, and so every metric, unchanged
  const auto a = three();
  auto b = RMatrix(3);
  for (const auto& row : a.rows()) b.push_row(row);
  CHECK(a == b);
  CHECK(acc_final(a) == acc_final(b));
}

TEST_CASE("csv round trips") {
  const auto dir = testing::scratch_dir("eval_csv");
  const auto r = make({{0.1 + 0.2}, {1.0 / 3.0, 0.8}, {0.5, 0.7, 2.0 / 3.0}});
  write_rmatrix_csv(r, dir / "r.csv");
  CHECK(read_rmatrix_csv(dir / "r.csv") == r);
  std::ifstream is(dir / "r.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "task,R1,R2,R3");

  write_curves_csv(curves(r), dir / "c.csv");
  std::ifstream cs(dir / "c.csv");
  std::string l0, l1;
  std::getline(cs, l0);
  std::getline(cs, l1);
  CHECK(l0 == "t,acc,bwt");
  CHECK(l1.back() == ',');

  const auto agg = aggregate({{"x", 1, r}, {"x", 2, three()}});
  write_aggregate_curves_csv(agg, dir / "agg.csv");
  const auto pts = read_aggregate_curves_csv(dir / "agg.csv");
  REQUIRE(pts.size() == 3);
  CHECK(pts[2].acc_mean == agg.acc_curve[2].mean);
  CHECK(pts[2].bwt_std == agg.bwt_curve[2]->std);
  CHECK(!pts[0].bwt_mean.has_value());

  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(format_double(85.0) == "85");

  std::ofstream(dir / "bad.csv") << "task,R1\n1,abc\n";
  CHECK_ERROR_KIND(read_rmatrix_csv(dir / "bad.csv"), ErrorKind::format);
}
