#pragma once

#include <stdexcept>
#include <string>

namespace ded {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (theta outside
/// the parameter box, nonpositive pulse width, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or unsupported configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Observed data that cannot have come from the declared acquisition
/// scheme, or files that do not parse.
class DataIntegrityError : public Error {
public:
    using Error::Error;
};

/// Too few complete periods to form a statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Singular, indefinite, or badly conditioned information matrix.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double smallest_eigenvalue)
        : Error(what), smallest_eigenvalue_(smallest_eigenvalue) {}

    double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

/// Pulse template whose first binned Fourier coefficient vanishes.
class DegenerateTemplateError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace ded
