#include <cmath>
#include <vector>

#include "doctest.h"
#include "weldad/error.hpp"
#include "weldad/evaluation/metrics.hpp"
#include "weldad/rng.hpp"
#include "weldad/scoring/aggregate.hpp"
#include "weldad/scoring/fusion.hpp"

using namespace weldad;
using namespace weldad::scoring;
using data::Label;

TEST_CASE("aggregation of a ramp") {
  const std::vector<double> x = {1, 2, 3, 4};
  CHECK(aggregate(x, 1.0, {AggregationKind::kMean}) == doctest::Approx(2.5));
  CHECK(aggregate(x, 1.0, {AggregationKind::kMax}) == 4.0);
  // 2-frame averages are {1.5, 2.5, 3.5}
  CHECK(aggregate(x, 1.0, {AggregationKind::kMaxOverMa, 2.0}) == doctest::Approx(3.5));
  const auto ma = moving_average(x, 2);
  REQUIRE(ma.size() == 3);
  CHECK(ma[0] == doctest::Approx(1.5));
  CHECK(ma[2] == doctest::Approx(3.5));
}

TEST_CASE("constant series aggregate to the constant") {
  const double c = 0.1;
  const std::vector<double> x(37, c);
  for (const char* m : {"mean", "max", "max_over_ma:1", "max_over_ma:100"}) {
    CAPTURE(m);
    CHECK(aggregate(x, 0.0427, aggregation_from_string(m)) == c);
  }
}

TEST_CASE("moving-average window") {
  CHECK(ma_window_frames(1.0, 0.0427) == 23);
  CHECK(ma_window_frames(0.001, 0.0427) == 1);
  const std::vector<double> x = {1, 5};
  // window longer than the series falls back to the series mean
  CHECK(aggregate(x, 1.0, {AggregationKind::kMaxOverMa, 10.0}) == doctest::Approx(3.0));
}

TEST_CASE("aggregation parsing and errors") {
  CHECK(aggregation_from_string("max_over_ma").kind == AggregationKind::kMaxOverMa);
  CHECK(aggregation_from_string("max_over_ma:2.5").ma_window_s == 2.5);
  CHECK(to_string(aggregation_from_string("max_over_ma:2.5")) == "max_over_ma:2.5");
  CHECK_THROWS_AS(aggregation_from_string("median"), ConfigError);
  CHECK_THROWS_AS(aggregation_from_string("max_over_ma:-1"), ConfigError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{}, 1.0, {}), DataError);
  ScoreSeries s{"a", Modality::kAudio, {1.0, -1.0}, 1.0};
  CHECK_THROWS_AS(aggregate(s, {}), DataError);
}

TEST_CASE("standardizer") {
  const std::vector<double> train = {2, 4};
  const auto st = fit_standardizer(train);
  CHECK(st.mean == doctest::Approx(3.0));
  CHECK(st.std == doctest::Approx(1.0));
  CHECK(st.apply(5.0) == doctest::Approx(2.0));

  const std::vector<double> flat = {7, 7, 7};
  const auto deg = fit_standardizer(flat);
  CHECK(deg.degenerate);
  CHECK(deg.apply(123.0) == 0.0);
  CHECK_THROWS_AS(fit_standardizer(std::vector<double>{1.0}), DataError);

  nlohmann::json j = st;
  const auto back = j.get<Standardizer>();
  CHECK(back.mean == st.mean);
  CHECK(back.std == st.std);
}

TEST_CASE("convex fusion") {
  CHECK(fuse(0.8, -1.3, 0.0) == -1.3);
  CHECK(fuse(0.8, -1.3, 1.0) == 0.8);
  CHECK(fuse(1.0, -1.0, 0.37) == doctest::Approx(-0.26));
  CHECK_THROWS_AS(fuse(0, 0, 1.01), ConfigError);
  CHECK_THROWS_AS(fuse(0, 0, -0.01), ConfigError);
}

namespace {

std::vector<FusionSample> constructed(bool identical) {
  Rng rng(11);
  std::vector<FusionSample> out;
  for (int i = 0; i < 200; ++i) {
    const bool defect = i % 2 == 1;
    FusionSample s;
    s.sample_id = "s" + std::to_string(i);
    s.label = defect ? Label::kDefect : Label::kGood;
    s.category = defect ? "Porosity" : "Good";
    s.z_audio = rng.normal();
    s.z_video = identical ? s.z_audio : (defect ? 2.0 : -2.0) + 0.1 * rng.normal();
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("weight search prefers the separating modality") {
  const auto val = constructed(false);
  const auto r = grid_search_weight(val);
  CHECK(r.w_audio == 0.0);
  CHECK(r.auc == 1.0);
  CHECK(r.auc_video == 1.0);
  REQUIRE(r.trace.size() == 101);
  // brute force over every weight, independent of the search loop
  double best = -1, best_w = -1;
  for (int i = 0; i <= 100; ++i) {
    const double w = i / 100.0;
    const double a = evaluation::auc(fused_scores(val, w), labels_of(val));
    CHECK(r.trace[i].second == a);
    if (a > best) best = a, best_w = w;
  }
  CHECK(best_w == r.w_audio);
}

TEST_CASE("weight search tie-break") {
  const auto val = constructed(true);
  const auto r = grid_search_weight(val);
  CHECK(r.w_audio == 0.0);
  for (const auto& [w, a] : r.trace) CHECK(a == r.auc);

  auto one_class = val;
  for (auto& s : one_class) s.label = Label::kGood;
  CHECK_THROWS_AS(grid_search_weight(one_class), DataError);
}
