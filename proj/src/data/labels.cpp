#include "weldad/data/labels.hpp"

#include <algorithm>

#include "weldad/error.hpp"

namespace weldad::data {

bool is_known_category(std::string_view category) {
  return std::find(kCategories.begin(), kCategories.end(), category) !=
         kCategories.end();
}

Label label_for_category(std::string_view category) {
  if (!is_known_category(category)) {
    throw DataError("unknown weld category: \"" + std::string(category) + "\"");
  }
  return category == kGoodCategory ? Label::kGood : Label::kDefect;
}

std::string_view to_string(Label label) {
  return label == Label::kGood ? "good" : "defect";
}

Label label_from_string(std::string_view s) {
  if (s == "good" || s == "0") return Label::kGood;
  if (s == "defect" || s == "1") return Label::kDefect;
  throw DataError("unknown label: \"" + std::string(s) + "\"");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val" || s == "validation") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split: \"" + std::string(s) + "\"");
}

}  // namespace weldad::data
