#pragma once

#include <spdlog/spdlog.h>

namespace weldad {

/// Library logger; writes to standard error. Created on first use.
spdlog::logger& log();

}  // namespace weldad
