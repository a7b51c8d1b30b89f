#include "fedseg/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <mutex>

#include "fedseg/errors.hpp"

namespace fedseg {

namespace {

spdlog::level::level_enum parse_level(const std::string& name) {
  if (name == "error") return spdlog::level::err;
  if (name == "info") return spdlog::level::info;
  if (name == "debug") return spdlog::level::debug;
  throw ConfigError("log level must be error, info or debug, got '" + name + "'");
}

}  // namespace

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("fedseg");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::level::level_enum level = spdlog::level::info;
    if (const char* env = std::getenv("FEDSEG_LOG")) {
      try {
        level = parse_level(env);
      } catch (const ConfigError&) {
        l->warn("ignoring unknown FEDSEG_LOG value '{}'", env);
      }
    }
    l->set_level(level);
    return l;
  }();
  return *instance;
}

void set_log_level(const std::string& level) { logger().set_level(parse_level(level)); }

}  // namespace fedseg
