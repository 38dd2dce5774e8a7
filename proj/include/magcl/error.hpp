#pragma once

#include <stdexcept>
#include <string>

namespace magcl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad hyperparameters, unsatisfiable sampler bounds.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data. Messages carry file and line when known.
class DataError : public Error {
public:
    using Error::Error;

    DataError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what) {}
};

/// Shape mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf, zero-norm rows and other numerical breakdowns.
class NumericError : public Error {
public:
    using Error::Error;
};

inline std::string shape_str(long rows, long cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

} // namespace magcl
