#pragma once

#include <string>

namespace dcorr {

enum class LogLevel { Debug, Info, Warning, Error, Silent };

void set_log_level(LogLevel level);
LogLevel log_level();
void log_message(LogLevel level, const std::string& message);

inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_warning(const std::string& m) { log_message(LogLevel::Warning, m); }

}  // namespace dcorr
