#pragma once

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace varfam::log {

/// Configures the default logger from the VF_LOG environment variable
/// (trace, debug, info, warn, error, off). Logs go to stderr.
inline void init_from_env() {
  auto logger = spdlog::stderr_color_mt("varfam");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("VF_LOG"); env != nullptr && *env != '\0') {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace varfam::log
