#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scpolab/env.hpp"
#include "scpolab/errors.hpp"

namespace scpolab {

enum class AlgoKind { scpo, trpo, trpo_lagrangian, cpo };

AlgoKind algo_from_string(const std::string& name);
std::string to_string(AlgoKind algo);

struct RunConfig {
  AlgoKind algo = AlgoKind::scpo;
  int epochs = 100;
  int steps_per_epoch = 4000;
  std::string env_preset = "point-hazard-4";
  EnvConfig env;  // resolved preset with any [env] overrides applied

  double gamma = 0.99;
  double lam = 0.97;
  double cost_lam = 0.95;
  double delta = 0.02;       // KL radius
  double cost_limit = 0.0;   // w: bound on the expected maximum state-wise cost
  double lagrangian_lr = 0.005;
  std::uint64_t seed = 0;
  bool epsilon_term = false;  // include the horizon correction in the slack

  double damping = 0.01;
  int cg_iters = 20;
  double cg_tol = 1e-8;
  int backtracks = 100;
  double backtrack_coeff = 0.8;

  int value_iters = 80;
  double value_lr = 1e-3;
  int hidden = 64;  // width of both tanh hidden layers, policy and value nets

  void validate() const;  // throws ConfigError

  // Stable textual form (also the hash input for the run id).
  std::string canonical_text() const;
  std::string run_id() const;
};

// Flat key-value file with [env] / [algo] / [training] sections; '#' or ';'
// start a comment.  Unknown keys and malformed values raise ConfigError.
// Overrides use the same "section.key=value" schema and are type-checked.
RunConfig parse_run_config_text(const std::string& text,
                                const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(const std::string& path,
                           const std::vector<std::string>& overrides = {});

}  // namespace scpolab
