#pragma once

#include <stdexcept>
#include <string>

namespace fgfpca {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-support input data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical stage could not produce a usable result (CLI exit code 4).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace fgfpca
