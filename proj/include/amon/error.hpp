#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amon {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration or argument outside its documented range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A file could not be opened, created or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input record; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Timestamps went backwards within one stream.
class OrderingError : public Error {
public:
    OrderingError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Too few positive entries to estimate a tail.
class SparsityError : public Error {
public:
    using Error::Error;
};

/// The tail regression produced an unusable fit (non-positive slope).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Relative volume of an all-zero array.
class UndefinedRatioError : public Error {
public:
    using Error::Error;
};

/// An internal consistency check failed.
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace amon
