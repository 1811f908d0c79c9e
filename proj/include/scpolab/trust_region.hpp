#pragma once

#include <Eigen/Core>

#include <functional>

#include "scpolab/errors.hpp"
#include "scpolab/neural.hpp"

namespace scpolab {

using HvpFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgOptions {
  int max_iters = 20;
  double residual_tol = 1e-8;  // relative to the right-hand side
};

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

// Matrix-free conjugate gradient for the SPD systems H x = rhs.  Throws
// SolverError when the operator shows non-positive curvature.
CgResult conjugate_gradient(const HvpFn& hvp, const Eigen::VectorXd& rhs,
                            const CgOptions& opts = {});

// Exact product of the KL Hessian at the current policy with v, plus
// damping * v.  For a diagonal Gaussian the Hessian splits into
// J_mu^T diag(1/sigma^2) J_mu averaged over the batch (mean-net block) and
// 2*I (log-std block); both factors are evaluated analytically via one
// forward-mode and one reverse-mode sweep, i.e. the KL differentiated twice
// along v.
Eigen::VectorXd fisher_vector_product(const GaussianPolicy& policy,
                                      const Eigen::MatrixXd& obs,
                                      const Eigen::VectorXd& v, double damping);

struct TrustRegionProblem {
  Eigen::VectorXd g;      // objective gradient
  Eigen::VectorXd b;      // constraint gradient; empty or zero when unconstrained
  double c = 0.0;         // constraint slack: feasible region is c + b.x <= 0
  double delta = 0.02;    // KL radius
  HvpFn hvp;
};

enum class StepMode { feasible, infeasible_recovery };

struct StepResult {
  Eigen::VectorXd direction;
  StepMode mode = StepMode::feasible;
  double lambda = 0.0;
  double nu = 0.0;
  double predicted_kl = 0.0;
  double predicted_constraint_change = 0.0;
};

// argmax g.x  s.t.  0.5 x.H.x <= delta  and  c + b.x <= 0, via the analytic
// single-constraint dual expressed through q = g.H^-1 g, r = g.H^-1 b,
// s = b.H^-1 b.  When the trust region cannot restore feasibility (c > 0 and
// c^2/s > 2 delta) the recovery direction -sqrt(2 delta / s) H^-1 b is
// returned instead.  b empty or zero degenerates to the plain KL-constrained
// step sqrt(2 delta / q) H^-1 g.
StepResult solve_step(const TrustRegionProblem& problem, const CgOptions& cg = {});

struct LineSearchOptions {
  double backtrack_coeff = 0.8;
  int max_backtracks = 100;
};

struct LineSearchEvaluators {
  std::function<double(const Eigen::VectorXd&)> sampled_kl;
  std::function<double(const Eigen::VectorXd&)> reward_surrogate;
  std::function<double(const Eigen::VectorXd&)> cost_surrogate;  // may be empty
};

struct LineSearchResult {
  Eigen::VectorXd theta;
  bool accepted = false;
  int backtracks = 0;  // the accepted exponent j
  double kl = 0.0;
  double reward_change = 0.0;
  double cost_change = 0.0;
};

// Backtracking acceptance over theta_k + coeff^j * direction.  A candidate
// passes when (1) the sampled KL stays within delta, (2) the cost surrogate
// rises by at most max(-slack_c, 0), and (3) the reward surrogate does not
// fall, with (3) waived when recovering from an infeasible iterate.
// Non-finite evaluations reject the candidate.  When no candidate passes the
// result keeps theta_k with accepted = false.
LineSearchResult line_search(const Eigen::VectorXd& theta_k, const Eigen::VectorXd& direction,
                             const LineSearchEvaluators& eval, double delta, double slack_c,
                             bool from_infeasible, const LineSearchOptions& opts = {});

}  // namespace scpolab
