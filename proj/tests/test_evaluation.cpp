#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "weldad/data/manifest.hpp"
#include "weldad/error.hpp"
#include "weldad/evaluation/metrics.hpp"
#include "weldad/evaluation/report.hpp"
#include "weldad/evaluation/split.hpp"
#include "weldad/rng.hpp"

using namespace weldad;
using namespace weldad::evaluation;
using data::Label;

namespace {

struct Scored {
  std::vector<double> s;
  std::vector<Label> l;
  void add(double score, Label label) {
    s.push_back(score);
    l.push_back(label);
  }
};

Scored from(std::initializer_list<double> defects, std::initializer_list<double> goods) {
  Scored r;
  for (double d : defects) r.add(d, Label::kDefect);
  for (double g : goods) r.add(g, Label::kGood);
  return r;
}

// Every (defect, good) pair, counted in floating point.
double pair_oracle(const Scored& x) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.s.size(); ++i) {
    if (x.l[i] != Label::kDefect) continue;
    for (std::size_t j = 0; j < x.s.size(); ++j) {
      if (x.l[j] != Label::kGood) continue;
      num += x.s[i] > x.s[j] ? 1.0 : x.s[i] == x.s[j] ? 0.5 : 0.0;
      den += 1;
    }
  }
  return num / den;
}

Scored random_set(std::uint64_t seed, int n, double shift, int levels = 0) {
  Rng rng(seed);
  Scored r;
  for (int i = 0; i < n; ++i) {
    const bool defect = rng.bernoulli(0.4);
    double v = rng.normal() + (defect ? shift : 0.0);
    if (levels > 0) v = std::round(v * levels) / levels;  // force ties
    r.add(v, defect ? Label::kDefect : Label::kGood);
  }
  return r;
}

}  // namespace

TEST_CASE("auc examples") {
  auto x = from({0.9, 0.4}, {0.5, 0.1});
  CHECK(auc(x.s, x.l) == 0.75);
  x = from({3, 4}, {1, 2});
  CHECK(auc(x.s, x.l) == 1.0);
  x = from({1, 1}, {1, 1, 1});
  CHECK(auc(x.s, x.l) == 0.5);
}

TEST_CASE("auc against pair oracle, trapezoid and negation") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto x = random_set(seed, 60, 0.7, seed % 2 ? 2 : 0);
    const double a = auc(x.s, x.l);
    CHECK(a == doctest::Approx(pair_oracle(x)).epsilon(1e-12));
    CHECK(auc_trapezoid(x.s, x.l) == doctest::Approx(a).epsilon(1e-12));
    std::vector<double> neg(x.s.size());
    std::transform(x.s.begin(), x.s.end(), neg.begin(), [](double v) { return -v; });
    CHECK(a + auc(neg, x.l) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("metric errors") {
  std::vector<double> s = {1, 2};
  std::vector<Label> good = {Label::kGood, Label::kGood};
  CHECK_THROWS_AS(auc(s, good), DataError);
  CHECK_THROWS_AS(eer(s, good), DataError);
  std::vector<Label> one = {Label::kGood};
  CHECK_THROWS_AS(auc(s, one), DataError);
  std::vector<double> bad = {1, NAN};
  std::vector<Label> both = {Label::kGood, Label::kDefect};
  CHECK_THROWS_AS(auc(bad, both), NumericError);
}

TEST_CASE("roc staircase") {
  const auto x = from({0.9, 0.4}, {0.5, 0.1});
  const auto roc = roc_curve(x.s, x.l);
  REQUIRE(roc.size() == 5);
  CHECK(std::isinf(roc.front().threshold));
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc[1].tpr == 0.5);
  CHECK(roc[2].fpr == 0.5);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
}

TEST_CASE("eer") {
  auto x = from({0.8}, {0.2});
  auto det = det_curve(x.s, x.l);
  CHECK(det.front().fpr == 0.0);
  CHECK(det.front().fnr == 1.0);
  CHECK(det.back().fpr == 1.0);
  CHECK(det.back().fnr == 0.0);
  CHECK(eer(x.s, x.l).eer == 0.0);

  x = from({0.9, 0.4}, {0.5, 0.1});
  // thresholds: 0.9 -> (0, .5), 0.5 -> (.5, .5): crossing at 0.5
  CHECK(eer(x.s, x.l).eer == doctest::Approx(0.5));

  x = random_set(99, 10000, 0.0);
  CHECK(eer(x.s, x.l).eer == doctest::Approx(0.5).epsilon(0.03));

  // two unit-variance gaussians 2 apart cross at FPR = FNR = Phi(-1) ~ 0.1587
  x = random_set(7, 20000, 2.0);
  CHECK(eer(x.s, x.l).eer == doctest::Approx(0.1587).epsilon(0.05));
}

namespace {

LabeledScoreSet labeled(std::uint64_t seed) {
  Rng rng(seed);
  LabeledScoreSet set;
  auto add = [&](std::string cat, double score) {
    const Label l = data::label_for_category(cat);
    set.push_back({cat + std::to_string(set.size()), score, l, cat, data::Split::kTest});
  };
  for (int i = 0; i < 40; ++i) add("Good", rng.normal());
  for (int i = 0; i < 20; ++i) add("Undercut", 10 + rng.normal());
  for (int i = 0; i < 20; ++i) add("Spatter", rng.normal() + 0.5);
  return set;
}

}  // namespace

TEST_CASE("per-category auc") {
  const auto set = labeled(3);
  const auto cats = per_category_auc(set);
  REQUIRE(cats.size() == 3);
  CHECK(cats[0].category == "Undercut");
  CHECK(cats[0].auc == 1.0);
  CHECK(cats[0].n_good == 40);
  CHECK(cats[1].category == "Spatter");
  CHECK(cats[2].category == "All");
  CHECK(cats[2].n_defect == 40);

  Scored pooled;
  for (const auto& e : set) pooled.add(e.score, e.label);
  CHECK(cats[2].auc == doctest::Approx(pair_oracle(pooled)).epsilon(1e-12));
  // equal sizes: pooled pair counts coincide with the mean; unequal ones do not
  CHECK(cats[2].auc == doctest::Approx((cats[0].auc + cats[1].auc) / 2));
  auto uneven = set;
  uneven.resize(set.size() - 15);
  const auto u = per_category_auc(uneven);
  CHECK(u[2].auc != doctest::Approx((u[0].auc + u[1].auc) / 2));

  auto wrong = set;
  wrong[0].label = Label::kDefect;
  CHECK_THROWS_AS(per_category_auc(wrong), DataError);
}

TEST_CASE("category distributed like goods is near chance") {
  Rng rng(5);
  LabeledScoreSet set;
  for (int i = 0; i < 2000; ++i) {
    const bool d = i % 2;
    set.push_back({std::to_string(i), rng.normal(), d ? Label::kDefect : Label::kGood,
                   d ? "Porosity" : "Good", data::Split::kTest});
  }
  CHECK(per_category_auc(set)[0].auc == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("evaluation report renders") {
  const auto r = evaluate(labeled(4), "audio");
  const auto j = to_json(r);
  CHECK(j["categories"].size() == 3);
  CHECK(j["roc"][0]["threshold"].is_null());
  CHECK(format_table(r).find("Undercut") != std::string::npos);
  const auto svg = render_svg(r);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("DET") != std::string::npos);
}

TEST_CASE("good split counts") {
  auto c = good_split_counts(819);
  CHECK(c.train == 576);
  CHECK(c.val == 122);
  CHECK(c.test == 121);
  c = good_split_counts(100);
  CHECK(c.train == 70);
  CHECK(c.val == 15);
  CHECK(c.test == 15);
}

namespace {

data::DatasetManifest synthetic_manifest(int goods, const std::vector<std::pair<std::string, int>>& defects) {
  data::DatasetManifest m;
  int k = 0;
  auto add = [&](const std::string& cat) {
    data::ManifestEntry e;
    e.sample_id = "w" + std::to_string(k++);
    e.audio_path = e.sample_id + ".wav";
    e.embedding_path = e.sample_id + ".emb";
    e.category = cat;
    e.duration_s = 1.0;
    m.entries.push_back(e);
  };
  for (int i = 0; i < goods; ++i) add("Good");
  for (const auto& [cat, n] : defects)
    for (int i = 0; i < n; ++i) add(cat);
  return m;
}

int count_defects(const data::DatasetManifest& m, const std::vector<std::string>& ids) {
  int n = 0;
  for (const auto& id : ids) n += m.find(id).label() == Label::kDefect;
  return n;
}

}  // namespace

TEST_CASE("corpus split") {
  // per-category defect counts summing to 3221, several of them odd
  const auto m = synthetic_manifest(
      819, {{"Excessive Convexity", 301}, {"Undercut", 290}, {"Crater Cracks", 293},
            {"Overlap", 292}, {"Excessive Penetration", 289}, {"Porosity w/Excessive Penetration", 288},
            {"Spatter", 291}, {"Lack Of Fusion", 287}, {"Warping", 300}, {"Porosity", 295},
            {"Burnthrough", 295}});
  const auto p = apply_split(m, 42);
  CHECK(p.train.size() == 576);
  CHECK(count_defects(m, p.train) == 0);
  CHECK(p.val.size() - count_defects(m, p.val) == 122);
  CHECK(p.test.size() - count_defects(m, p.test) == 121);
  CHECK(count_defects(m, p.val) == 1610);
  CHECK(count_defects(m, p.test) == 1611);

  std::set<std::string> all(p.train.begin(), p.train.end());
  all.insert(p.val.begin(), p.val.end());
  all.insert(p.test.begin(), p.test.end());
  CHECK(all.size() == m.entries.size());

  const auto q = apply_split(m, 42);
  CHECK(q.train == p.train);
  CHECK(q.test == p.test);
  auto reversed = m;
  std::reverse(reversed.entries.begin(), reversed.entries.end());
  CHECK(apply_split(reversed, 42).val == p.val);
  CHECK(apply_split(m, 43).train != p.train);
}

TEST_CASE("small split and guards") {
  const auto m = synthetic_manifest(100, {{"Porosity", 100}});
  const auto p = apply_split(m, 1);
  CHECK(p.train.size() == 70);
  CHECK(count_defects(m, p.val) == 50);
  CHECK(count_defects(m, p.test) == 50);
  CHECK_THROWS_AS(apply_split(synthetic_manifest(1, {{"Porosity", 5}}), 1), DataError);
  CHECK_THROWS_AS(apply_split(synthetic_manifest(5, {{"Porosity", 1}}), 1), DataError);

  auto tagged = m;
  const auto a = p.assignment();
  for (auto& e : tagged.entries) e.split = a.at(e.sample_id);
  const auto again = partition_of(tagged, 999);
  CHECK(again.train.size() == 70);
  tagged.entries.back().split = data::Split::kTrain;
  CHECK_THROWS_AS(partition_of(tagged, 1), DataError);
}

TEST_CASE("manifest round trip and errors") {
  auto m = synthetic_manifest(3, {{"Overlap", 2}});
  m.entries[1].split = data::Split::kVal;
  m.entries[2].weld_type = "non-fillet";
  m.entries[3].material = "3mm-BSK46";
  const auto text = data::format_manifest(m);
  const auto back = data::parse_manifest(text);
  CHECK(back.entries == m.entries);

  CHECK(data::parse_manifest("\n\n").entries.empty());
  const std::string good_line =
      R"({"sample_id":"a","audio":"a.wav","embedding":"a.emb","category":"Good","weld_type":"fillet","material":"7mm-FE410","duration_s":1})";
  CHECK_THROWS_AS(data::parse_manifest(good_line + "\n" + good_line), DataError);
  std::string unknown = good_line;
  unknown.replace(unknown.find("\"Good\""), 6, "\"Cracked\"");
  try {
    data::parse_manifest(good_line + "\n" + unknown);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(data::parse_manifest(R"({"sample_id":"a"})"), DataError);

  const auto dir = std::filesystem::temp_directory_path() / "weldad_manifest_test";
  std::filesystem::create_directories(dir);
  data::save_manifest(dir / "m.jsonl", m);
  const auto loaded = data::load_manifest(dir / "m.jsonl");
  CHECK(loaded.entries == m.entries);
  const auto report = data::validate(loaded);
  CHECK_FALSE(report.ok());
  CHECK(report.missing_files.size() == 10);
  std::filesystem::remove_all(dir);
}
