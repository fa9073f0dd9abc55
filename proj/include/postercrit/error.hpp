#pragma once

#include <stdexcept>
#include <string>

namespace postercrit {

enum class ErrorCode {
    Parse,
    Validation,
    NotFound,
    KindMismatch,
    Generation,
    Schema,
    State,
    Backend,
    Io,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the core; the C API maps `code()` onto status values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string subject = {})
        : std::runtime_error(message), code_(code), subject_(std::move(subject)) {}

    ErrorCode code() const noexcept { return code_; }
    // The offending id, tag, field or rule name, when there is one.
    const std::string& subject() const noexcept { return subject_; }

private:
    ErrorCode code_;
    std::string subject_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset)
        : Error(ErrorCode::Parse, message + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace postercrit
