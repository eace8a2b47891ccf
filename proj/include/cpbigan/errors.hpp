#pragma once

#include <stdexcept>
#include <string>

namespace cpbigan {

/// Failure categories; the CLI maps each to a distinct exit code.
enum class ErrorCategory { config = 2, data = 3, io = 4, training = 5, internal = 6 };

inline const char* category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::io: return "io";
    case ErrorCategory::training: return "training";
    case ErrorCategory::internal: return "internal";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}
    ErrorCategory category() const noexcept { return category_; }

  private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};
struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorCategory::data, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};
struct TrainingError : Error {
    explicit TrainingError(const std::string& w) : Error(ErrorCategory::training, w) {}
};

} // namespace cpbigan
