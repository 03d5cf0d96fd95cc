// Exception types raised by the fbmadt library.
#pragma once

#include <stdexcept>
#include <string>

namespace fbmadt {

/// Base of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error report.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_argument"; }
};

class InvalidGridError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_grid"; }
};

class ConditioningError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical_conditioning"; }
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

class HorizonExceededError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "horizon_exceeded"; }
};

class GridAlignmentError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "grid_alignment"; }
};

}  // namespace fbmadt
