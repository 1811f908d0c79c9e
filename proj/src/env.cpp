#include "scpolab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "scpolab/errors.hpp"

namespace scpolab {

namespace {

constexpr int kMaxPlacementTries = 1000;

bool inside_any(const Eigen::Vector2d& p, const std::vector<Circle>& discs) {
  for (const Circle& c : discs) {
    if ((p - c.center).norm() <= c.radius) return true;
  }
  return false;
}

std::vector<Circle> ring_layout(int count, double ring_radius, double disc_radius) {
  std::vector<Circle> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / count;
    out.push_back({{ring_radius * std::cos(angle), ring_radius * std::sin(angle)}, disc_radius});
  }
  return out;
}

}  // namespace

void EnvConfig::validate() const {
  if (!(world_half_extent > 0.0)) throw ConfigError("env: world_half_extent must be positive");
  if (!(dt > 0.0)) throw ConfigError("env: dt must be positive");
  if (!(max_speed > 0.0)) throw ConfigError("env: max_speed must be positive");
  if (!(goal_radius > 0.0)) throw ConfigError("env: goal_radius must be positive");
  if (max_episode_steps <= 0) throw ConfigError("env: max_episode_steps must be positive");
  if (obs_top_k <= 0) throw ConfigError("env: obs_top_k must be positive");
  if (!hazards.empty() && !pillars.empty()) {
    throw ConfigError("env: only one obstacle family (hazards or pillars) is supported per task");
  }
  auto check_discs = [&](const std::vector<Circle>& discs, const char* kind) {
    for (const Circle& c : discs) {
      if (!(c.radius > 0.0)) throw ConfigError(std::string("env: ") + kind + " radius must be positive");
      if (std::abs(c.center.x()) + c.radius > world_half_extent ||
          std::abs(c.center.y()) + c.radius > world_half_extent) {
        throw ConfigError(std::string("env: ") + kind + " must lie fully inside the world bounds");
      }
    }
  };
  check_discs(hazards, "hazard");
  check_discs(pillars, "pillar");
}

EnvConfig EnvConfig::preset(const std::string& name) {
  EnvConfig cfg;
  if (name == "point-open") {
    // no obstacles: the cost signal is identically zero
  } else if (name == "point-hazard-1") {
    cfg.hazards = {{{0.0, 0.0}, 0.2}};
  } else if (name == "point-hazard-4") {
    cfg.hazards = ring_layout(4, 0.9, 0.2);
  } else if (name == "point-hazard-8") {
    cfg.hazards = ring_layout(8, 1.1, 0.2);
  } else if (name == "point-pillar-1") {
    cfg.pillars = {{{0.0, 0.0}, 0.2}};
  } else if (name == "point-pillar-4") {
    cfg.pillars = ring_layout(4, 0.9, 0.2);
  } else if (name == "point-pillar-8") {
    cfg.pillars = ring_layout(8, 1.1, 0.2);
  } else {
    throw ConfigError("env: unknown preset '" + name + "'");
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> EnvConfig::preset_names() {
  return {"point-open",     "point-hazard-1", "point-hazard-4", "point-hazard-8",
          "point-pillar-1", "point-pillar-4", "point-pillar-8"};
}

double goal_reward(double d_prev, double d_now, double goal_radius) {
  return (d_prev - d_now) + (d_now < goal_radius ? 1.0 : 0.0);
}

double hazard_cost(double d_h, double R_h) {
  return std::max(0.0, R_h - d_h);
}

double pillar_cost(const Eigen::Vector2d& position, const std::vector<Circle>& pillars) {
  return inside_any(position, pillars) ? 1.0 : 0.0;
}

double pillar_cost(const EnvState& state, const std::vector<Circle>& pillars) {
  return pillar_cost(state.position, pillars);
}

PointNavEnv::PointNavEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

Eigen::Vector2d PointNavEnv::sample_free_position() {
  std::uniform_real_distribution<double> coord(-cfg_.world_half_extent, cfg_.world_half_extent);
  for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    const double x = coord(rng_);
    const double y = coord(rng_);
    const Eigen::Vector2d p{x, y};
    if (!inside_any(p, cfg_.hazards) && !inside_any(p, cfg_.pillars)) return p;
  }
  throw ConfigError("env: could not find a free position (obstacles fill the world?)");
}

Eigen::VectorXd PointNavEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_.position = sample_free_position();
  state_.goal = sample_free_position();
  state_.velocity.setZero();
  state_.steps_elapsed = 0;
  state_.prev_goal_distance = (state_.position - state_.goal).norm();
  done_ = false;
  return observe();
}

Eigen::VectorXd PointNavEnv::compute_costs() const {
  Eigen::VectorXd costs(1);
  if (!cfg_.hazards.empty()) {
    double worst = 0.0;
    for (const Circle& h : cfg_.hazards) {
      worst = std::max(worst, hazard_cost((state_.position - h.center).norm(), h.radius));
    }
    costs[0] = worst;
  } else if (!cfg_.pillars.empty()) {
    costs[0] = pillar_cost(state_.position, cfg_.pillars);
  } else {
    costs[0] = 0.0;
  }
  return costs;
}

EnvStep PointNavEnv::step(const Eigen::Vector2d& action) {
  if (done_) throw std::domain_error("env: step on a finished episode");
  if (!action.allFinite()) throw std::domain_error("env: non-finite action");

  const Eigen::Vector2d clipped = action.cwiseMax(-1.0).cwiseMin(1.0);
  state_.velocity = clipped * cfg_.max_speed;
  Eigen::Vector2d pos = state_.position + state_.velocity * cfg_.dt;
  pos = pos.cwiseMax(-cfg_.world_half_extent).cwiseMin(cfg_.world_half_extent);

  // Pillars are rigid: an update that lands inside one is pushed back to the
  // boundary (kept a hair inside so the contact cost registers).
  for (const Circle& p : cfg_.pillars) {
    const Eigen::Vector2d offset = pos - p.center;
    const double dist = offset.norm();
    if (dist < p.radius) {
      const Eigen::Vector2d dir =
          dist > 1e-12 ? Eigen::Vector2d(offset / dist) : Eigen::Vector2d(1.0, 0.0);
      pos = p.center + dir * (p.radius * (1.0 - 1e-12));
    }
  }
  state_.position = pos;
  state_.steps_elapsed += 1;

  const Eigen::VectorXd costs = compute_costs();

  double d_now = (state_.position - state_.goal).norm();
  const double reward = goal_reward(state_.prev_goal_distance, d_now, cfg_.goal_radius);
  if (d_now < cfg_.goal_radius) {
    state_.goal = sample_free_position();
    d_now = (state_.position - state_.goal).norm();
  }
  state_.prev_goal_distance = d_now;

  done_ = state_.steps_elapsed >= cfg_.max_episode_steps;
  return {observe(), reward, costs, done_};
}

Eigen::VectorXd PointNavEnv::observe() const {
  const int k = cfg_.obs_top_k;
  Eigen::VectorXd obs(cfg_.observation_dim());
  const Eigen::Vector2d to_goal = state_.goal - state_.position;
  const double d_goal = to_goal.norm();
  const Eigen::Vector2d compass = d_goal > 1e-12 ? Eigen::Vector2d(to_goal / d_goal)
                                                 : Eigen::Vector2d(0.0, 0.0);
  obs[0] = compass.x();
  obs[1] = compass.y();
  obs[2] = d_goal;

  const double sentinel = 2.0 * cfg_.world_half_extent;
  auto fill_slots = [&](const std::vector<Circle>& discs, int base) {
    std::vector<std::pair<double, int>> order;
    order.reserve(discs.size());
    for (int i = 0; i < static_cast<int>(discs.size()); ++i) {
      order.emplace_back((discs[i].center - state_.position).norm(), i);
    }
    std::stable_sort(order.begin(), order.end());
    for (int slot = 0; slot < k; ++slot) {
      if (slot < static_cast<int>(order.size())) {
        const Circle& c = discs[order[slot].second];
        const Eigen::Vector2d rel = c.center - state_.position;
        obs[base + 3 * slot + 0] = rel.x();
        obs[base + 3 * slot + 1] = rel.y();
        obs[base + 3 * slot + 2] = c.radius;
      } else {
        obs[base + 3 * slot + 0] = sentinel;
        obs[base + 3 * slot + 1] = sentinel;
        obs[base + 3 * slot + 2] = 0.0;
      }
    }
  };
  fill_slots(cfg_.hazards, 3);
  fill_slots(cfg_.pillars, 3 + 3 * k);

  obs[3 + 6 * k] = state_.velocity.x();
  obs[4 + 6 * k] = state_.velocity.y();
  return obs;
}

}  // namespace scpolab
