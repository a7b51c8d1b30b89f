#pragma once

#include <spdlog/spdlog.h>

#include <string>

namespace fedseg {

// Process-wide stderr logger. The level comes from FEDSEG_LOG
// (error|info|debug, default info) on first use.
spdlog::logger& logger();

// Overrides the level; accepts the same names as FEDSEG_LOG. ConfigError
// for anything else.
void set_log_level(const std::string& level);

}  // namespace fedseg
