#include "spdmidas/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "spdmidas/error.hpp"

namespace spdmidas {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::warn)};
std::mutex g_mutex;
}  // namespace

LogLevel parse_log_level(std::string_view name) {
  if (name == "error") return LogLevel::error;
  if (name == "warn" || name == "warning") return LogLevel::warn;
  if (name == "info") return LogLevel::info;
  if (name == "debug") return LogLevel::debug;
  throw Error(ErrorKind::config, fmt::format("unknown log level '{}'", name));
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_message(LogLevel level, const std::string& text) {
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(g_mutex);
  fmt::print(stderr, "[{}] {}\n", names[static_cast<int>(level)], text);
}

}  // namespace spdmidas
