#pragma once

#include <Eigen/Core>

#include <vector>

#include "scpolab/rng.hpp"

namespace scpolab {

struct AdvantageConfig {
  double gamma = 0.99;
  double lam = 0.97;             // reward GAE
  const double cost_gamma = 1.0; // cost increments are never discounted
  double cost_lam = 0.95;

  void validate() const;
};

// R_t = sum_{k>=t} gamma^(k-t) r_k, seeded past the end with `bootstrap`
// (0 at a true terminal, V(s_end) at a truncation point).
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma,
                                       double bootstrap = 0.0);

// Generalized advantage estimates for one episode.  `values` carries one
// extra entry: the bootstrap value past the last step.  With lam = 0 this
// reduces exactly to the one-step residuals r_t + gamma*V_{t+1} - V_t.
std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        double gamma, double lam);

// Undiscounted suffix sums of the cost increments: the regression targets for
// the cost value head.  Non-increasing along the episode.  Throws
// std::domain_error on a negative increment.
std::vector<double> d_return_targets(const std::vector<double>& increments);

// Balance the regression set: keep every pair with a non-zero target plus an
// equal count of uniformly chosen zero-target pairs.  If every target is zero
// one pair is kept so the fit stays well-posed.  Returns ascending indices.
std::vector<int> subsample_zero_targets(const std::vector<double>& targets, Rng& rng);

// Shift to zero mean, scale to unit deviation (guarded).  Order preserving.
void normalize_in_place(Eigen::VectorXd& v);

}  // namespace scpolab
