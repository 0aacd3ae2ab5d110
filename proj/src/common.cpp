#include "jldict/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace jldict {

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("JLDICT_LOG");
    if (env == nullptr) return LogLevel::error;
    std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

void log_error(const std::string& msg) { std::cerr << "[jldict] error: " << msg << "\n"; }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << "[jldict] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << "[jldict] debug: " << msg << "\n";
}

std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace jldict
