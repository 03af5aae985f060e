#include "weldad/evaluation/split.hpp"

#include <algorithm>
#include <cmath>

#include "weldad/error.hpp"
#include "weldad/rng.hpp"

namespace weldad::evaluation {

SplitCounts good_split_counts(int n_goods) {
  constexpr double total = kGoodTrainRef + kGoodValRef + kGoodTestRef;
  SplitCounts c;
  c.train = static_cast<int>(std::lround(n_goods * kGoodTrainRef / total));
  c.val = static_cast<int>(std::lround(n_goods * kGoodValRef / total));
  c.test = n_goods - c.train - c.val;
  return c;
}

std::map<std::string, data::Split> Partition::assignment() const {
  std::map<std::string, data::Split> out;
  for (const auto& id : train) out[id] = data::Split::kTrain;
  for (const auto& id : val) out[id] = data::Split::kVal;
  for (const auto& id : test) out[id] = data::Split::kTest;
  return out;
}

Partition apply_split(const data::DatasetManifest& manifest, std::uint64_t seed) {
  std::map<std::string_view, std::vector<std::string>> by_category;
  for (const auto& e : manifest.entries) by_category[e.category].push_back(e.sample_id);
  auto ordered = [&](std::string_view category) {
    std::vector<std::string> ids = by_category[category];
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, "split/" + std::string(category)));
    rng.shuffle(ids);
    return ids;
  };

  Partition p;
  const std::vector<std::string> goods = ordered(data::kGoodCategory);
  std::size_t n_defects = 0;
  for (const auto& [cat, ids] : by_category) {
    if (cat != data::kGoodCategory) n_defects += ids.size();
  }
  if (goods.size() < 2 || n_defects < 2) {
    throw DataError("split needs at least 2 good and 2 defect samples (got " +
                    std::to_string(goods.size()) + " good, " + std::to_string(n_defects) +
                    " defect)");
  }
  const SplitCounts gc = good_split_counts(static_cast<int>(goods.size()));
  p.train.assign(goods.begin(), goods.begin() + gc.train);
  p.val.assign(goods.begin() + gc.train, goods.begin() + gc.train + gc.val);
  p.test.assign(goods.begin() + gc.train + gc.val, goods.end());

  bool odd_to_test = true;
  for (std::string_view category : data::kCategories) {
    if (category == data::kGoodCategory || !by_category.count(category)) continue;
    const std::vector<std::string> ids = ordered(category);
    std::size_t n_val = ids.size() / 2;
    if (ids.size() % 2 == 1) {
      if (!odd_to_test) ++n_val;
      odd_to_test = !odd_to_test;
    }
    p.val.insert(p.val.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    p.test.insert(p.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  }
  return p;
}

Partition partition_of(const data::DatasetManifest& manifest, std::uint64_t seed) {
  const bool all_tagged = !manifest.entries.empty() &&
                          std::all_of(manifest.entries.begin(), manifest.entries.end(),
                                      [](const auto& e) { return e.split.has_value(); });
  if (!all_tagged) return apply_split(manifest, seed);
  Partition p;
  for (const auto& e : manifest.entries) {
    switch (*e.split) {
      case data::Split::kTrain:
        if (e.label() != data::Label::kGood) {
          throw DataError("manifest puts defect sample \"" + e.sample_id +
                          "\" in the training split; training uses good welds only");
        }
        p.train.push_back(e.sample_id);
        break;
      case data::Split::kVal: p.val.push_back(e.sample_id); break;
      case data::Split::kTest: p.test.push_back(e.sample_id); break;
    }
  }
  return p;
}

}  // namespace weldad::evaluation
