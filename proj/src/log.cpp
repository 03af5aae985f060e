#include "weldad/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

namespace weldad {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto existing = spdlog::get("weldad");
    if (existing) return existing;
    auto l = spdlog::stderr_color_mt("weldad");
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *logger;
}

}  // namespace weldad
