#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "scpolab/env.hpp"
#include "scpolab/errors.hpp"
#include "scpolab/rng.hpp"

using namespace scpolab;

namespace {

bool in_circle(const Eigen::Vector2d& p, const Circle& c) {
  return (p - c.center).norm() <= c.radius;
}

}  // namespace

TEST_CASE("presets resolve and unknown names are rejected") {
  for (const std::string& name : EnvConfig::preset_names()) {
    const EnvConfig cfg = EnvConfig::preset(name);
    CHECK(cfg.observation_dim() == 5 + 6 * cfg.obs_top_k);
    CHECK(cfg.cost_dim() == 1);
  }
  CHECK(EnvConfig::preset("point-hazard-4").hazards.size() == 4);
  CHECK(EnvConfig::preset("point-pillar-8").pillars.size() == 8);
  CHECK(EnvConfig::preset("point-open").hazards.empty());
  CHECK_THROWS_AS(EnvConfig::preset("point-mystery"), ConfigError);
}

TEST_CASE("config validation rejects degenerate geometry") {
  EnvConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  EnvConfig both = EnvConfig::preset("point-hazard-1");
  both.pillars = {{{1.0, 1.0}, 0.1}};
  CHECK_THROWS_AS(both.validate(), ConfigError);

  EnvConfig outside;
  outside.hazards = {{{2.0, 0.0}, 0.5}};  // pokes past the wall
  CHECK_THROWS_AS(outside.validate(), ConfigError);
}

TEST_CASE("identical seed and action sequence give a bitwise identical trajectory") {
  const EnvConfig cfg = EnvConfig::preset("point-hazard-4");
  PointNavEnv a(cfg), b(cfg);
  const Eigen::VectorXd obs_a = a.reset(99), obs_b = b.reset(99);
  REQUIRE(obs_a == obs_b);

  Rng rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < 150; ++t) {
    const Eigen::Vector2d act(uni(rng), uni(rng));
    const EnvStep sa = a.step(act);
    const EnvStep sb = b.step(act);
    REQUIRE(sa.observation == sb.observation);
    REQUIRE(sa.reward == sb.reward);
    REQUIRE(sa.costs == sb.costs);
    REQUIRE(sa.done == sb.done);
  }
}

TEST_CASE("positions stay inside the world box and actions are clipped") {
  const EnvConfig cfg = EnvConfig::preset("point-open");
  PointNavEnv env(cfg);
  env.reset(3);
  for (int t = 0; t < 250 && !env.done(); ++t) {
    env.step(Eigen::Vector2d(5.0, 5.0));  // saturating push toward a corner
    CHECK(std::abs(env.state().position.x()) <= cfg.world_half_extent);
    CHECK(std::abs(env.state().position.y()) <= cfg.world_half_extent);
  }

  PointNavEnv e1(cfg), e2(cfg);
  e1.reset(11);
  e2.reset(11);
  const EnvStep huge = e1.step(Eigen::Vector2d(10.0, -42.0));
  const EnvStep unit = e2.step(Eigen::Vector2d(1.0, -1.0));
  CHECK(huge.observation == unit.observation);
  CHECK(huge.reward == unit.reward);
}

TEST_CASE("hazard cost matches the point-in-circle ramp at every step") {
  EnvConfig cfg = EnvConfig::preset("point-hazard-1");  // single disc at the origin
  PointNavEnv env(cfg);
  env.reset(17);
  Rng rng(23);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  bool saw_contact = false, saw_free = false;
  for (int episode = 0; episode < 4; ++episode) {
    env.reset(17 + episode);
    while (!env.done()) {
      // bias the walk toward the disc so both sides of the ramp are visited
      const Eigen::Vector2d to_center = -env.state().position;
      const Eigen::Vector2d act =
          0.7 * to_center.normalized() + 0.3 * Eigen::Vector2d(uni(rng), uni(rng));
      const EnvStep s = env.step(act);
      const double d = env.state().position.norm();
      const double want = std::max(0.0, cfg.hazards[0].radius - d);
      CHECK(s.costs[0] == doctest::Approx(want).epsilon(1e-12));
      CHECK(s.costs[0] >= 0.0);
      CHECK(s.costs[0] <= cfg.hazards[0].radius);
      saw_contact = saw_contact || s.costs[0] > 0.0;
      saw_free = saw_free || s.costs[0] == 0.0;
    }
  }
  CHECK(saw_contact);
  CHECK(saw_free);
}

TEST_CASE("pillar contact costs exactly one and blocks penetration") {
  const EnvConfig cfg = EnvConfig::preset("point-pillar-1");
  PointNavEnv env(cfg);
  bool saw_contact = false;
  for (int episode = 0; episode < 6 && !saw_contact; ++episode) {
    env.reset(40 + episode);
    while (!env.done()) {
      const Eigen::Vector2d to_center = -env.state().position;
      const EnvStep s = env.step(to_center.normalized());
      CHECK((s.costs[0] == 0.0 || s.costs[0] == 1.0));
      const double dist = env.state().position.norm();
      // rigid disc: the update never ends up meaningfully inside
      CHECK(dist >= cfg.pillars[0].radius * (1.0 - 1e-9));
      if (s.costs[0] == 1.0) {
        saw_contact = true;
        break;
      }
    }
  }
  CHECK(saw_contact);
}

TEST_CASE("seeded resets never start inside an obstacle") {
  for (const std::string& name : {"point-pillar-4", "point-hazard-4"}) {
    const EnvConfig cfg = EnvConfig::preset(name);
    PointNavEnv env(cfg);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      env.reset(seed);
      for (const Circle& c : cfg.pillars) CHECK_FALSE(in_circle(env.state().position, c));
      for (const Circle& c : cfg.hazards) CHECK_FALSE(in_circle(env.state().position, c));
    }
  }
}

TEST_CASE("reaching the goal pays the bonus, moves the goal, and keeps the episode alive") {
  const EnvConfig cfg = EnvConfig::preset("point-open");
  PointNavEnv env(cfg);
  env.reset(5);
  bool reached = false;
  for (int t = 0; t < cfg.max_episode_steps && !env.done(); ++t) {
    const Eigen::Vector2d old_goal = env.state().goal;
    const Eigen::Vector2d to_goal = old_goal - env.state().position;
    const EnvStep s = env.step(to_goal.normalized());
    const double d_now = (env.state().position - old_goal).norm();
    if (d_now < cfg.goal_radius) {
      reached = true;
      CHECK(s.reward > 1.0);  // progress plus the sparse bonus
      CHECK_FALSE(s.done);
      CHECK((env.state().goal - old_goal).norm() > 0.0);
      break;
    }
  }
  CHECK(reached);
}

TEST_CASE("episodes truncate exactly at the step limit") {
  EnvConfig cfg = EnvConfig::preset("point-open");
  cfg.max_episode_steps = 7;
  PointNavEnv env(cfg);
  env.reset(1);
  for (int t = 0; t < 6; ++t) CHECK_FALSE(env.step(Eigen::Vector2d(0.1, 0.0)).done);
  CHECK(env.step(Eigen::Vector2d(0.1, 0.0)).done);
  CHECK_THROWS_AS(env.step(Eigen::Vector2d(0.0, 0.0)), std::domain_error);
}

TEST_CASE("non-finite actions are rejected") {
  PointNavEnv env(EnvConfig::preset("point-open"));
  env.reset(0);
  CHECK_THROWS_AS(env.step(Eigen::Vector2d(std::nan(""), 0.0)), std::domain_error);
}

TEST_CASE("observation layout: compass, goal distance, obstacle slots, velocity") {
  EnvConfig cfg = EnvConfig::preset("point-hazard-1");
  cfg.obs_top_k = 3;
  PointNavEnv env(cfg);
  const Eigen::VectorXd obs = env.reset(8);
  REQUIRE(obs.size() == 5 + 6 * 3);

  const Eigen::Vector2d to_goal = env.state().goal - env.state().position;
  CHECK(obs[2] == doctest::Approx(to_goal.norm()));
  CHECK(obs[0] == doctest::Approx(to_goal.x() / to_goal.norm()));
  CHECK(obs[1] == doctest::Approx(to_goal.y() / to_goal.norm()));

  // slot 0 is the lone hazard, relative position plus radius
  const Eigen::Vector2d rel = cfg.hazards[0].center - env.state().position;
  CHECK(obs[3] == doctest::Approx(rel.x()));
  CHECK(obs[4] == doctest::Approx(rel.y()));
  CHECK(obs[5] == doctest::Approx(cfg.hazards[0].radius));

  // remaining hazard slots and all pillar slots are sentinel padded
  const double sentinel = 2.0 * cfg.world_half_extent;
  for (const int slot : {1, 2}) {
    CHECK(obs[3 + 3 * slot + 0] == doctest::Approx(sentinel));
    CHECK(obs[3 + 3 * slot + 1] == doctest::Approx(sentinel));
    CHECK(obs[3 + 3 * slot + 2] == 0.0);
  }
  for (int slot = 0; slot < 3; ++slot) {
    CHECK(obs[3 + 9 + 3 * slot + 0] == doctest::Approx(sentinel));
  }

  // velocity is zero right after reset, then reflects the commanded action
  CHECK(obs[3 + 18] == 0.0);
  CHECK(obs[4 + 18] == 0.0);
  const EnvStep s = env.step(Eigen::Vector2d(0.5, -0.25));
  CHECK(s.observation[3 + 18] == doctest::Approx(0.5 * cfg.max_speed));
  CHECK(s.observation[4 + 18] == doctest::Approx(-0.25 * cfg.max_speed));
}

TEST_CASE("nearest obstacles occupy the leading slots") {
  const EnvConfig cfg = EnvConfig::preset("point-hazard-4");
  PointNavEnv env(cfg);
  const Eigen::VectorXd obs = env.reset(2);
  double prev = 0.0;
  for (int slot = 0; slot < cfg.obs_top_k; ++slot) {
    const Eigen::Vector2d rel(obs[3 + 3 * slot], obs[3 + 3 * slot + 1]);
    const double d = rel.norm();
    if (slot > 0) CHECK(d >= prev - 1e-12);
    prev = d;
  }
}

TEST_CASE("goal reward decomposes into progress plus the in-disc bonus") {
  CHECK(goal_reward(1.0, 0.6, 0.3) == doctest::Approx(0.4));
  CHECK(goal_reward(0.5, 0.2, 0.3) == doctest::Approx(0.3 + 1.0));
  CHECK(goal_reward(0.2, 0.4, 0.3) == doctest::Approx(-0.2));
  CHECK(hazard_cost(0.05, 0.2) == doctest::Approx(0.15));
  CHECK(hazard_cost(0.25, 0.2) == 0.0);
}
