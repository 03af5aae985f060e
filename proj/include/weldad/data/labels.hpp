#pragma once

#include <array>
#include <string>
#include <string_view>

namespace weldad::data {

enum class Label { kGood, kDefect };

enum class Split { kTrain, kVal, kTest };

/// Weld categories, "Good" plus eleven defect types.
inline constexpr std::array<std::string_view, 12> kCategories = {
    "Good",
    "Excessive Convexity",
    "Undercut",
    "Crater Cracks",
    "Overlap",
    "Excessive Penetration",
    "Porosity w/Excessive Penetration",
    "Spatter",
    "Lack Of Fusion",
    "Warping",
    "Porosity",
    "Burnthrough",
};

inline constexpr std::string_view kGoodCategory = "Good";

bool is_known_category(std::string_view category);
/// Good iff category == "Good"; throws DataError for unknown names.
Label label_for_category(std::string_view category);

std::string_view to_string(Label label);
Label label_from_string(std::string_view s);
std::string_view to_string(Split split);
Split split_from_string(std::string_view s);

}  // namespace weldad::data
