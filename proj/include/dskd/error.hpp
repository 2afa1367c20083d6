#pragma once

#include <stdexcept>
#include <string>

namespace dskd {

// Shape/precondition violations on matrix operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Out-of-range scalar parameters (tau, lambda, rates, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad run configuration (empty vocab intersection, invalid sim config, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures that must never pass silently (SVD non-convergence,
// NaN/Inf escaping a kernel, diverging simulation).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed external input (token sequences, files).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dskd
