#pragma once

#include <stdexcept>
#include <string>

namespace mjc {

// Bad numeric argument (alpha out of range, dt <= 0, p >= alpha, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad user-facing request (unknown model name, malformed flag value).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Model coefficients misbehaved (non-finite value, unbounded Hamiltonian);
// message carries the offending point.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A simulated trajectory left the representable range; message carries the
// step index.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quadrature or localization radius too coarse for the requested tolerance.
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent solver/experiment configuration (CFL violation, bad eps list,
// node budget exceeded).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Explicit time-stepping blew past the a-priori bound.
struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mjc
