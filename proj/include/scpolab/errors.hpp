#pragma once

#include <stdexcept>

namespace scpolab {

// Bad user-supplied configuration: unknown keys, invalid values, impossible
// layouts.  The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown inside the trust-region machinery (indefinite
// curvature, degenerate constraint).  The trainer skips the epoch.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace scpolab
