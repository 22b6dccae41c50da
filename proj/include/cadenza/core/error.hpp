#pragma once

#include <stdexcept>
#include <string>

namespace cadenza {

/// Error categories surfaced as CLI exit diagnostics.
enum class ErrorCategory { Config, Data, Parse, Io, Numeric };

inline const char* to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Numeric: return "numeric";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(msg), category_(cat) {}
    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorCategory::Config, msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(ErrorCategory::Data, msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(ErrorCategory::Parse, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorCategory::Io, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorCategory::Numeric, msg) {}
};

/// Shape mismatch between tensors; message must name both shapes.
struct ShapeError : NumericError {
    explicit ShapeError(const std::string& msg) : NumericError(msg) {}
};

/// API misuse, e.g. backward() before any forward pass was recorded.
struct StateError : Error {
    explicit StateError(const std::string& msg) : Error(ErrorCategory::Config, msg) {}
};

} // namespace cadenza
