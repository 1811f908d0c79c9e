#include "scpolab/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scpolab/errors.hpp"

namespace scpolab {

void AdvantageConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("advantage: gamma must be in [0, 1)");
  if (!(lam >= 0.0 && lam <= 1.0)) throw ConfigError("advantage: lam must be in [0, 1]");
  if (!(cost_lam >= 0.0 && cost_lam <= 1.0)) throw ConfigError("advantage: cost_lam must be in [0, 1]");
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma,
                                       double bootstrap) {
  std::vector<double> out(rewards.size());
  double acc = bootstrap;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        double gamma, double lam) {
  if (values.size() != rewards.size() + 1) {
    throw std::invalid_argument("gae: values must have one extra bootstrap entry");
  }
  std::vector<double> adv(rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lam * acc;
    adv[t] = acc;
  }
  return adv;
}

std::vector<double> d_return_targets(const std::vector<double>& increments) {
  std::vector<double> out(increments.size());
  double acc = 0.0;
  for (int t = static_cast<int>(increments.size()) - 1; t >= 0; --t) {
    if (increments[t] < 0.0) throw std::domain_error("d_return_targets: negative increment");
    acc += increments[t];
    out[t] = acc;
  }
  return out;
}

std::vector<int> subsample_zero_targets(const std::vector<double>& targets, Rng& rng) {
  std::vector<int> zeros, kept;
  for (int i = 0; i < static_cast<int>(targets.size()); ++i) {
    if (targets[i] == 0.0) {
      zeros.push_back(i);
    } else {
      kept.push_back(i);
    }
  }
  std::size_t want_zeros;
  if (kept.empty()) {
    want_zeros = zeros.empty() ? 0 : 1;  // keep the fit well-posed
  } else {
    want_zeros = std::min(zeros.size(), kept.size());
  }
  // partial Fisher-Yates: the first want_zeros entries are a uniform sample
  for (std::size_t i = 0; i < want_zeros; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, zeros.size() - 1);
    std::swap(zeros[i], zeros[pick(rng)]);
  }
  kept.insert(kept.end(), zeros.begin(), zeros.begin() + want_zeros);
  std::sort(kept.begin(), kept.end());
  return kept;
}

void normalize_in_place(Eigen::VectorXd& v) {
  if (v.size() == 0) return;
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / v.size());
  v = (v.array() - mean) / (sd + 1e-8);
}

}  // namespace scpolab
