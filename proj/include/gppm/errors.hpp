#pragma once

#include <stdexcept>
#include <string>

namespace gppm {

// Bad inputs, malformed files, invalid configuration. CLI exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure after recovery attempts (Cholesky breakdown, divergent
// optimization, non-finite gradients). CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gppm
