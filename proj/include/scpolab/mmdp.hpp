#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <utility>
#include <vector>

namespace scpolab {

// Environment observation extended with one running-maximum cost tag per
// constraint.  The tags turn the maximum state-wise cost of an episode into a
// plain sum of per-step increments, so the usual expected-sum machinery
// (value targets, advantages, surrogate gradients) applies to it unchanged.
struct AugmentedState {
  Eigen::VectorXd base;       // raw environment observation
  Eigen::VectorXd max_costs;  // running maximum per constraint, >= 0, starts at 0

  // Network input: base observation with the tags appended.
  Eigen::VectorXd concat() const;
};

struct Transition {
  AugmentedState state;
  Eigen::VectorXd action;
  AugmentedState next_state;
  double reward = 0.0;
  Eigen::VectorXd costs;       // instantaneous cost per constraint
  Eigen::VectorXd increments;  // growth of each running maximum this step
  double log_prob = 0.0;
  bool done = false;
};

struct EpisodeBuffer {
  std::vector<Transition> transitions;
  bool truncated = false;  // cut at a batch boundary instead of finishing

  int size() const { return static_cast<int>(transitions.size()); }
  bool empty() const { return transitions.empty(); }
};

// Amount by which `cost` exceeds the running maximum, clamped at zero.
// Throws std::domain_error on non-finite input.
double cost_increment(double cost, double running_max);

// Advance the augmentation one step: returns the next augmented state and the
// per-constraint increments.  The new running maximum is max(previous, cost),
// so the tag is exactly the maximum cost seen so far.
std::pair<AugmentedState, Eigen::VectorXd> augment_step(
    const AugmentedState& prev, const Eigen::VectorXd& raw_next_obs,
    const Eigen::VectorXd& costs);

// Both sides of the telescoping identity: (sum of increments, max cost) for
// one constraint over a whole episode.  They agree up to additive float
// rounding.  Throws std::domain_error on an empty buffer or bad index.
std::pair<double, double> episode_max_identity(const EpisodeBuffer& buffer,
                                               int constraint);

// Columnar dump, one row per transition:
//   t, obs_0..obs_{n-1}, m_0..m_{k-1}, act_0..act_{a-1}, reward,
//   cost_0..cost_{k-1}, d_0..d_{k-1}, log_prob, done
void write_episode_csv(const EpisodeBuffer& buffer, std::ostream& out);

}  // namespace scpolab
