#pragma once

#include <sstream>
#include <string>

namespace scenemap {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Global level, initialized once from the SCENEMAP_LOG env var
// (error|warn|info|debug). Default: warn.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_message(LogLevel level, const std::string& msg);

namespace detail {
inline void log_format(std::ostringstream&) {}
template <typename T, typename... Rest>
void log_format(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  log_format(os, rest...);
}
}  // namespace detail

template <typename... Args>
void log(LogLevel level, const Args&... args) {
  if (level > log_level()) return;
  std::ostringstream os;
  detail::log_format(os, args...);
  log_message(level, os.str());
}

#define SCENEMAP_LOG_WARN(...) ::scenemap::log(::scenemap::LogLevel::Warn, __VA_ARGS__)
#define SCENEMAP_LOG_INFO(...) ::scenemap::log(::scenemap::LogLevel::Info, __VA_ARGS__)
#define SCENEMAP_LOG_DEBUG(...) ::scenemap::log(::scenemap::LogLevel::Debug, __VA_ARGS__)

}  // namespace scenemap
