#pragma once

#include <stdexcept>
#include <string>

namespace gapfill {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV content, gaps, series shape).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A training run or numerical routine that could not complete.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergedError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace gapfill
