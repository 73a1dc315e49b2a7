#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace ecogrid::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold from $ECOGRID_LOG (error|warn|info|debug); defaults to warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("ECOGRID_LOG");
    const std::string_view v = env ? env : "";
    if (v == "error") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

inline void write(Level level, std::string_view msg) {
  if (level > threshold()) return;
  static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void error(std::string_view m) { write(Level::error, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace ecogrid::log
