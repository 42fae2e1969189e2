/// @file  error.hpp
/// @brief Exception types shared by every tripcast module.
///
/// The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
/// NumericalError -> 3.

#pragma once

#include <stdexcept>
#include <string>

namespace tripcast {

/// Bad user configuration (flag values, missing files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data that fails parsing or validation.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV parse failure carrying the 1-based line number of the offending row.
class ParseError : public DataError {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Destination not reachable from the origin.
class NoPathError : public DataError {
public:
    using DataError::DataError;
};

/// A computation could not produce a meaningful number (degenerate denominators,
/// singular systems).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tripcast
