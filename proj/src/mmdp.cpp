#include "scpolab/mmdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace scpolab {

namespace {

void print_value(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

Eigen::VectorXd AugmentedState::concat() const {
  Eigen::VectorXd out(base.size() + max_costs.size());
  out << base, max_costs;
  return out;
}

double cost_increment(double cost, double running_max) {
  if (!std::isfinite(cost) || !std::isfinite(running_max)) {
    throw std::domain_error("cost_increment: non-finite input");
  }
  return std::max(cost - running_max, 0.0);
}

std::pair<AugmentedState, Eigen::VectorXd> augment_step(
    const AugmentedState& prev, const Eigen::VectorXd& raw_next_obs,
    const Eigen::VectorXd& costs) {
  if (costs.size() != prev.max_costs.size()) {
    throw std::domain_error("augment_step: cost dimension mismatch");
  }
  const Eigen::Index m = costs.size();
  AugmentedState next;
  next.base = raw_next_obs;
  next.max_costs.resize(m);
  Eigen::VectorXd increments(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    increments[i] = cost_increment(costs[i], prev.max_costs[i]);
    next.max_costs[i] = std::max(prev.max_costs[i], costs[i]);
  }
  return {std::move(next), std::move(increments)};
}

std::pair<double, double> episode_max_identity(const EpisodeBuffer& buffer,
                                               int constraint) {
  if (buffer.empty()) {
    throw std::domain_error("episode_max_identity: empty buffer");
  }
  const auto m = buffer.transitions.front().costs.size();
  if (constraint < 0 || constraint >= m) {
    throw std::domain_error("episode_max_identity: constraint index out of range");
  }
  double sum_d = 0.0;
  double max_c = 0.0;  // matches the initial running maximum of zero
  for (const Transition& tr : buffer.transitions) {
    sum_d += tr.increments[constraint];
    max_c = std::max(max_c, tr.costs[constraint]);
  }
  return {sum_d, max_c};
}

void write_episode_csv(const EpisodeBuffer& buffer, std::ostream& out) {
  if (buffer.empty()) {
    throw std::domain_error("write_episode_csv: empty buffer");
  }
  const Transition& first = buffer.transitions.front();
  const Eigen::Index n_obs = first.state.base.size();
  const Eigen::Index m = first.costs.size();
  const Eigen::Index n_act = first.action.size();

  out << "t";
  for (Eigen::Index i = 0; i < n_obs; ++i) out << ",obs_" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",m_" << i;
  for (Eigen::Index i = 0; i < n_act; ++i) out << ",act_" << i;
  out << ",reward";
  for (Eigen::Index i = 0; i < m; ++i) out << ",cost_" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",d_" << i;
  out << ",log_prob,done\n";

  for (int t = 0; t < buffer.size(); ++t) {
    const Transition& tr = buffer.transitions[t];
    out << t;
    for (Eigen::Index i = 0; i < n_obs; ++i) { out << ','; print_value(out, tr.state.base[i]); }
    for (Eigen::Index i = 0; i < m; ++i) { out << ','; print_value(out, tr.state.max_costs[i]); }
    for (Eigen::Index i = 0; i < n_act; ++i) { out << ','; print_value(out, tr.action[i]); }
    out << ','; print_value(out, tr.reward);
    for (Eigen::Index i = 0; i < m; ++i) { out << ','; print_value(out, tr.costs[i]); }
    for (Eigen::Index i = 0; i < m; ++i) { out << ','; print_value(out, tr.increments[i]); }
    out << ','; print_value(out, tr.log_prob);
    out << ',' << (tr.done ? 1 : 0) << '\n';
  }
}

}  // namespace scpolab
