#include "gpshape/log.h"

#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/sinks/stdout_sinks.h>

namespace gpshape {

namespace {
std::mutex g_logger_mutex;
std::shared_ptr<spdlog::logger> g_logger;

std::shared_ptr<spdlog::logger> make_logger(bool color) {
  std::shared_ptr<spdlog::logger> log;
  if (color) {
    log = std::make_shared<spdlog::logger>("gpshape", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
  } else {
    log = std::make_shared<spdlog::logger>("gpshape", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  }
  log->set_level(spdlog::level::warn);
  log->set_pattern("[%l] %v");
  return log;
}
}  // namespace

std::shared_ptr<spdlog::logger> logger() {
  std::lock_guard lock(g_logger_mutex);
  if (!g_logger) g_logger = make_logger(false);
  return g_logger;
}

void configure_logging(spdlog::level::level_enum level, LogFormat format, bool color) {
  std::lock_guard lock(g_logger_mutex);
  g_logger = make_logger(color && format == LogFormat::Text);
  g_logger->set_level(level);
  if (format == LogFormat::Json) {
    g_logger->set_pattern(R"({"level":"%l","msg":"%v"})");
  }
}

}  // namespace gpshape
