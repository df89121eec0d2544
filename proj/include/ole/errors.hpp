#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace ole {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments, inconsistent shapes, unmet preconditions.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed file contents. Carries the byte offset or row where parsing failed.
class FormatError : public ValidationError {
public:
    enum class Kind { bad_magic, bad_version, truncated, non_finite, label_count, trailing_data, csv_syntax };

    FormatError(Kind kind, std::string message, std::optional<std::uint64_t> offset,
                std::optional<std::uint64_t> row = std::nullopt);

    Kind kind() const noexcept { return kind_; }
    std::optional<std::uint64_t> offset() const noexcept { return offset_; }
    std::optional<std::uint64_t> row() const noexcept { return row_; }

private:
    Kind kind_;
    std::optional<std::uint64_t> offset_;
    std::optional<std::uint64_t> row_;
};

class IoError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Degenerate numerics: non-finite likelihoods, zero-norm directions.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace ole
