#pragma once

namespace weldad {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace weldad
