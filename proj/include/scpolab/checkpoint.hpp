#pragma once

#include <string>

#include "scpolab/neural.hpp"

namespace scpolab {

// Snapshot format: one JSON header line (kind, layer sizes, log_std for
// policies, parameter count) followed by the flat parameter vector as raw
// little-endian doubles.

void save_policy_checkpoint(const GaussianPolicy& policy, const std::string& path);
GaussianPolicy load_policy_checkpoint(const std::string& path);

void save_value_checkpoint(const ValueFunction& value, const std::string& path);
ValueFunction load_value_checkpoint(const std::string& path);

}  // namespace scpolab
