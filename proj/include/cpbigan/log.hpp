#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace cpbigan {

enum class LogLevel { quiet = 0, warn = 1, info = 2 };

inline LogLevel& log_level() {
    static LogLevel level = LogLevel::warn;
    return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
    static std::mutex mu;
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::lock_guard lock(mu);
    std::clog << (level == LogLevel::warn ? "[warn] " : "[info] ") << msg << '\n';
}

inline void log_warn(const std::string& msg) { log_message(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }

} // namespace cpbigan
