#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace gpshape {

// Library-wide logger writing to stderr. The CLI reconfigures its level and
// pattern; library code only logs through it.
std::shared_ptr<spdlog::logger> logger();

enum class LogFormat { Text, Json };
void configure_logging(spdlog::level::level_enum level, LogFormat format, bool color);

}  // namespace gpshape
