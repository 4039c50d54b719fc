#pragma once

#include <stdexcept>
#include <string>

namespace pipeobs {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (e.g. nonpositive density).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inversion or state left the admissible density band.
class OutOfBandError : public Error {
public:
    using Error::Error;
};

/// Malformed or invalid scenario configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a stepper, node solve or fixed-point iteration.
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace pipeobs
