#pragma once

#include <string>
#include <string_view>

#include <fmt/format.h>

namespace spdmidas {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel parse_log_level(std::string_view name);
void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes one line to stderr when `level` is enabled. Thread safe.
void log_message(LogLevel level, const std::string& text);

template <typename... Args>
void log_warn(fmt::format_string<Args...> f, Args&&... args) {
  if (log_level() >= LogLevel::warn) log_message(LogLevel::warn, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void log_info(fmt::format_string<Args...> f, Args&&... args) {
  if (log_level() >= LogLevel::info) log_message(LogLevel::info, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace spdmidas
