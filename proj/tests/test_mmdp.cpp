#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <random>
#include <sstream>
#include <stdexcept>

#include "scpolab/mmdp.hpp"
#include "scpolab/rng.hpp"

using namespace scpolab;

namespace {

AugmentedState make_state(double m) {
  AugmentedState s;
  s.base = Eigen::Vector2d(0.5, -1.0);
  s.max_costs = Eigen::VectorXd::Constant(1, m);
  return s;
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("cost increment is the clamped excess over the running maximum") {
  CHECK(cost_increment(3.0, 1.0) == doctest::Approx(2.0));
  CHECK(cost_increment(1.0, 3.0) == 0.0);
  CHECK(cost_increment(0.0, 0.0) == 0.0);
  CHECK(cost_increment(2.5, 2.5) == 0.0);
  CHECK_THROWS_AS(cost_increment(std::numeric_limits<double>::quiet_NaN(), 0.0),
                  std::domain_error);
  CHECK_THROWS_AS(cost_increment(1.0, std::numeric_limits<double>::infinity()),
                  std::domain_error);
}

TEST_CASE("augment_step raises the tag to the new cost and reports the growth") {
  const AugmentedState prev = make_state(1.0);
  const Eigen::VectorXd next_obs = Eigen::Vector2d(0.0, 0.0);

  auto [above, d_above] = augment_step(prev, next_obs, vec1(4.0));
  CHECK(above.max_costs[0] == doctest::Approx(4.0));
  CHECK(d_above[0] == doctest::Approx(3.0));
  CHECK(above.base == next_obs);

  auto [below, d_below] = augment_step(prev, next_obs, vec1(0.25));
  CHECK(below.max_costs[0] == doctest::Approx(1.0));
  CHECK(d_below[0] == 0.0);
}

TEST_CASE("concat appends the tag to the base observation") {
  const AugmentedState s = make_state(2.5);
  const Eigen::VectorXd cat = s.concat();
  REQUIRE(cat.size() == 3);
  CHECK(cat[0] == doctest::Approx(0.5));
  CHECK(cat[1] == doctest::Approx(-1.0));
  CHECK(cat[2] == doctest::Approx(2.5));
}

TEST_CASE("summed increments telescope to the episode maximum cost") {
  Rng rng(12345);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 60);

  for (int trial = 0; trial < 200; ++trial) {
    EpisodeBuffer buffer;
    AugmentedState state = make_state(0.0);
    double running_max = 0.0;
    double brute_max = 0.0;
    const int n = len(rng);
    for (int t = 0; t < n; ++t) {
      const double cost = uni(rng) < 0.4 ? 0.0 : 3.0 * uni(rng);
      brute_max = std::max(brute_max, cost);
      auto [next, d] = augment_step(state, state.base, vec1(cost));

      // the tag is exactly the prefix maximum at every step
      running_max = std::max(running_max, cost);
      CHECK(next.max_costs[0] == doctest::Approx(running_max).epsilon(1e-12));
      CHECK(d[0] >= 0.0);

      Transition tr;
      tr.state = state;
      tr.next_state = next;
      tr.action = Eigen::Vector2d(0.0, 0.0);
      tr.costs = vec1(cost);
      tr.increments = d;
      buffer.transitions.push_back(tr);
      state = next;
    }
    const auto [d_sum, max_cost] = episode_max_identity(buffer, 0);
    CHECK(max_cost == doctest::Approx(brute_max).epsilon(1e-12));
    CHECK(std::abs(d_sum - brute_max) <= 1e-12);
  }
}

TEST_CASE("episode identity rejects empty buffers and bad constraint indices") {
  EpisodeBuffer empty;
  CHECK_THROWS_AS(episode_max_identity(empty, 0), std::domain_error);

  EpisodeBuffer one;
  Transition tr;
  tr.state = make_state(0.0);
  tr.next_state = make_state(1.0);
  tr.action = Eigen::Vector2d(0.0, 0.0);
  tr.costs = vec1(1.0);
  tr.increments = vec1(1.0);
  one.transitions.push_back(tr);
  CHECK_THROWS_AS(episode_max_identity(one, 5), std::domain_error);
  CHECK_THROWS_AS(episode_max_identity(one, -1), std::domain_error);
}

TEST_CASE("episode csv dump carries one row per transition plus a header") {
  EpisodeBuffer buffer;
  AugmentedState state = make_state(0.0);
  for (int t = 0; t < 3; ++t) {
    auto [next, d] = augment_step(state, state.base, vec1(0.5 * t));
    Transition tr;
    tr.state = state;
    tr.next_state = next;
    tr.action = Eigen::Vector2d(0.1, 0.2);
    tr.reward = 1.0;
    tr.costs = vec1(0.5 * t);
    tr.increments = d;
    buffer.transitions.push_back(tr);
    state = next;
  }
  std::ostringstream out;
  write_episode_csv(buffer, out);
  const std::string text = out.str();
  int lines = 0;
  for (const char ch : text) lines += ch == '\n';
  CHECK(lines == 4);
  CHECK(text.rfind("t,obs_0", 0) == 0);

  std::ostringstream empty_out;
  EpisodeBuffer empty;
  CHECK_THROWS_AS(write_episode_csv(empty, empty_out), std::domain_error);
}
