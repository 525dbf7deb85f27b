#pragma once

#include <stdexcept>
#include <string>

namespace cf {

// Error categories map onto CLI exit codes: validation/format -> 1, runtime -> 2.
enum class ErrorCategory { validation, format, runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

// Input violates a documented invariant or precondition.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorCategory::validation, what) {}
};

// A file could not be parsed (bad magic, truncated, version mismatch, malformed JSON).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

// Failure during computation (divergence, non-finite values).
class RuntimeFailure : public Error {
public:
    explicit RuntimeFailure(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::format: return "format";
    case ErrorCategory::runtime: return "runtime";
    }
    return "unknown";
}

}  // namespace cf
