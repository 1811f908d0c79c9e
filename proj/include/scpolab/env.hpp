#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "scpolab/rng.hpp"

namespace scpolab {

struct Circle {
  Eigen::Vector2d center;
  double radius = 0.0;
};

// Planar point-mass navigation world.  Exactly one obstacle family (hazards
// or pillars) may be populated; it defines the single cost signal.
struct EnvConfig {
  std::vector<Circle> hazards;  // trespassable, cost ramps with penetration depth
  std::vector<Circle> pillars;  // rigid, contact costs 1 and blocks motion
  double goal_radius = 0.3;
  double world_half_extent = 2.0;
  int max_episode_steps = 200;
  double dt = 0.05;
  double max_speed = 1.0;
  int obs_top_k = 4;  // obstacle slots in the observation, sentinel padded

  void validate() const;  // throws ConfigError
  int observation_dim() const { return 5 + 6 * obs_top_k; }
  int cost_dim() const { return 1; }

  static EnvConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

struct EnvState {
  Eigen::Vector2d position{0.0, 0.0};
  Eigen::Vector2d velocity{0.0, 0.0};
  Eigen::Vector2d goal{0.0, 0.0};
  int steps_elapsed = 0;
  double prev_goal_distance = 0.0;
};

struct EnvStep {
  Eigen::VectorXd observation;
  double reward = 0.0;
  Eigen::VectorXd costs;
  bool done = false;
};

// Dense progress term plus a sparse bonus when inside the goal disc.
double goal_reward(double d_prev, double d_now, double goal_radius);

// max(0, R_h - d_h): zero outside the disc, ramping linearly to R_h at the center.
double hazard_cost(double d_h, double R_h);

// 1.0 when the position touches any pillar disc (closed), else 0.0.
double pillar_cost(const Eigen::Vector2d& position, const std::vector<Circle>& pillars);
double pillar_cost(const EnvState& state, const std::vector<Circle>& pillars);

class PointNavEnv {
 public:
  explicit PointNavEnv(EnvConfig cfg);

  // Reseeds the internal generator and starts a fresh episode: the agent and
  // the goal land on collision-free uniform positions, the running state is
  // cleared.  Returns the first observation.
  Eigen::VectorXd reset(std::uint64_t seed);

  // Velocity-controlled kinematics: v = clip(action) * max_speed,
  // position += v * dt, clipped to the world box and pushed out of pillars.
  // Reaching the goal re-randomizes it and the episode continues.
  // Throws std::domain_error on non-finite actions or when already done.
  EnvStep step(const Eigen::Vector2d& action);

  Eigen::VectorXd observe() const;

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  bool done() const { return done_; }
  int observation_dim() const { return cfg_.observation_dim(); }

 private:
  Eigen::Vector2d sample_free_position();
  Eigen::VectorXd compute_costs() const;

  EnvConfig cfg_;
  EnvState state_;
  Rng rng_;
  bool done_ = true;
};

}  // namespace scpolab
