#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stvine {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input row. `line()` is 1-based; 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public Error { using Error::Error; };
class ReferenceError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class InsufficientDataError : public Error { using Error::Error; };
class ImputationError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class RebinError : public Error { using Error::Error; };
class BoundaryError : public Error { using Error::Error; };
class DegenerateDensityError : public Error { using Error::Error; };

}  // namespace stvine
