#pragma once

#include <stdexcept>
#include <string>

namespace polyrelax {

// Iterative solver failed to reach its tolerance.
struct NoConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A time-stepping run left its admissible region (determinant floor, vacuum,
// fold-over, gradient blow-up); carries a diagnostic reason.
struct SolverAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration input (bad TOML, out-of-range values).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace polyrelax
