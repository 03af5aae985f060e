#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

namespace weldad {

/// Throws ConfigError if `j` is not an object or carries a key outside `allowed`.
void require_keys_subset(const nlohmann::json& j,
                         std::initializer_list<std::string_view> allowed,
                         std::string_view where);

/// Reads j[key] into `out` when present; type errors become ConfigError.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out);

/// 64-bit FNV-1a of a string, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace weldad

#include "weldad/error.hpp"

namespace weldad {

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

}  // namespace weldad
