#pragma once

#include <stdexcept>
#include <string>

namespace ambc {

/// Invalid user-supplied configuration or arguments. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown (non-PD covariance, non-finite values). CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated dataset/model file, or a file built for a different shape.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ambc
