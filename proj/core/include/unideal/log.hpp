#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace unideal::log {

enum class Level { kQuiet = 0, kInfo = 1, kDebug = 2 };

// Verbosity comes from UNIDEAL_LOG (quiet|info|debug); default info.
inline Level level() {
  static const Level lvl = [] {
    const char* env = std::getenv("UNIDEAL_LOG");
    if (env == nullptr) return Level::kInfo;
    const std::string s(env);
    if (s == "quiet") return Level::kQuiet;
    if (s == "debug") return Level::kDebug;
    return Level::kInfo;
  }();
  return lvl;
}

inline void info(const std::string& msg) {
  if (level() >= Level::kInfo) std::cerr << "[unideal] " << msg << "\n";
}

inline void debug(const std::string& msg) {
  if (level() >= Level::kDebug) std::cerr << "[unideal] " << msg << "\n";
}

}  // namespace unideal::log
