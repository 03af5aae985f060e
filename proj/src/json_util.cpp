#include "weldad/json_util.hpp"

#include <algorithm>
#include <cstdio>

namespace weldad {

void require_keys_subset(const nlohmann::json& j,
                         std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  if (!j.is_object()) {
    throw ConfigError(std::string(where) + ": expected a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace weldad
