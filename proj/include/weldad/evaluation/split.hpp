#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "weldad/data/manifest.hpp"

namespace weldad::evaluation {

/// Good-sample proportions of the reference corpus split (train/val/test).
inline constexpr int kGoodTrainRef = 576;
inline constexpr int kGoodValRef = 122;
inline constexpr int kGoodTestRef = 121;

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};

/// train = round(n * 576 / 819), val = round(n * 122 / 819), test = rest.
SplitCounts good_split_counts(int n_goods);

struct Partition {
  std::vector<std::string> train;  // goods only
  std::vector<std::string> val;
  std::vector<std::string> test;

  std::map<std::string, data::Split> assignment() const;
};

// Goods are shuffled and cut per good_split_counts. Defects are split per
// category (in vocabulary order): floor(n/2) to validation and test each,
// the odd ones out alternating test, val, test, ... so the defect totals
// differ by at most one. Shuffles are seeded per category and run over
// ids sorted first, so the result does not depend on manifest order.
// Throws DataError with fewer than 2 goods or 2 defects.
Partition apply_split(const data::DatasetManifest& manifest, std::uint64_t seed);

/// Entries' own split fields if every entry carries one, else apply_split().
Partition partition_of(const data::DatasetManifest& manifest, std::uint64_t seed);

}  // namespace weldad::evaluation
