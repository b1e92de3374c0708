#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cura {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix extents.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid hyperparameter, selector or numeric setting.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// API misuse: empty inputs, out-of-range ids, calls in the wrong order.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A statistic is undefined for the data (constant target, zero-variance column).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Not enough rows to build a single window.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : Error(what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

/// Missing column or header in tabular input.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Malformed text input; `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Malformed run configuration (unknown key, bad value).
class ConfigError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Model file could not be read back.
class LoadError : public Error {
public:
    enum class Kind { io, bad_magic, unsupported_version, checksum_mismatch, malformed };

    LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace cura
