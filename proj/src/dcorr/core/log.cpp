#include "dcorr/core/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace dcorr {
namespace {

std::atomic<LogLevel> g_level{LogLevel::Warning};
std::mutex g_mutex;

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warning: return "warning";
    case LogLevel::Error: return "error";
    case LogLevel::Silent: break;
  }
  return "";
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_message(LogLevel level, const std::string& message) {
  if (level < g_level.load() || level == LogLevel::Silent) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[dcorr] " << tag(level) << ": " << message << '\n';
}

}  // namespace dcorr
