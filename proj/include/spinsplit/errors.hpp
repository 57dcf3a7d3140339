#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace spinsplit {

// Coarse failure categories, also used for CLI exit codes and the
// machine-readable error record printed on stderr.
enum class ErrorCategory {
    config,    // invalid or inconsistent run configuration
    usage,     // bad command-line invocation
    io,        // filesystem failure
    corrupt,   // dataset fails validation against its manifest
    domain,    // degenerate analysis input (empty region, zero denominator, ...)
    internal,  // should-not-happen
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::io: return "io";
        case ErrorCategory::corrupt: return "corrupt";
        case ErrorCategory::domain: return "domain";
        case ErrorCategory::internal: return "internal";
    }
    return "internal";
}

inline int category_exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::usage: return 3;
        case ErrorCategory::io: return 4;
        case ErrorCategory::corrupt: return 5;
        case ErrorCategory::domain: return 6;
        case ErrorCategory::internal: return 7;
    }
    return 7;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string message)
        : std::runtime_error(std::move(message)), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }
    int exit_code() const noexcept { return category_exit_code(category_); }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
    if (!condition) fail(category, message);
}

}  // namespace spinsplit
