#include "scpolab/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace scpolab {

namespace {

constexpr double kTinyLambda = 1e-12;

double dual_active(double lam, double A, double B, double r, double c, double s) {
  lam = std::max(lam, kTinyLambda);
  return 0.5 * (A / lam + B * lam) - r * c / s;
}

double dual_inactive(double lam, double q, double delta) {
  lam = std::max(lam, kTinyLambda);
  return 0.5 * (q / lam + 2.0 * delta * lam);
}

}  // namespace

CgResult conjugate_gradient(const HvpFn& hvp, const Eigen::VectorXd& rhs,
                            const CgOptions& opts) {
  CgResult res;
  res.x = Eigen::VectorXd::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r = rhs;  // residual of H x = rhs at x = 0
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  for (int it = 0; it < opts.max_iters; ++it) {
    const Eigen::VectorXd hp = hvp(p);
    const double php = p.dot(hp);
    if (!(php > 0.0)) {
      throw SolverError("conjugate_gradient: non-positive curvature p.H.p = " +
                        std::to_string(php) + " at iteration " + std::to_string(it));
    }
    const double alpha = rs / php;
    res.x += alpha * p;
    r -= alpha * hp;
    res.iterations = it + 1;
    const double rs_next = r.squaredNorm();
    if (std::sqrt(rs_next) / rhs_norm <= opts.residual_tol) {
      res.converged = true;
      rs = rs_next;
      break;
    }
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  res.rel_residual = std::sqrt(rs) / rhs_norm;
  if (res.rel_residual <= opts.residual_tol) res.converged = true;
  return res;
}

Eigen::VectorXd fisher_vector_product(const GaussianPolicy& policy,
                                      const Eigen::MatrixXd& obs,
                                      const Eigen::VectorXd& v, double damping) {
  if (v.size() != policy.param_count()) {
    throw std::invalid_argument("fisher_vector_product: vector size mismatch");
  }
  if (obs.rows() == 0) throw std::invalid_argument("fisher_vector_product: empty batch");
  const int n_mean = policy.mean_net.param_count();
  const double n = static_cast<double>(obs.rows());
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();

  const Eigen::MatrixXd mu_dot = policy.mean_net.jvp_batch(obs, v.head(n_mean));
  const Eigen::MatrixXd cot = ((mu_dot.array().rowwise() * inv_var.transpose()) / n).matrix();

  Eigen::VectorXd out(v.size());
  out.head(n_mean) = policy.mean_net.vjp_batch(obs, cot);
  out.tail(policy.action_dim()) = 2.0 * v.tail(policy.action_dim());
  return out + damping * v;
}

StepResult solve_step(const TrustRegionProblem& problem, const CgOptions& cg) {
  if (!(problem.delta > 0.0)) throw SolverError("solve_step: delta must be positive");
  if (!problem.hvp) throw SolverError("solve_step: missing curvature operator");
  const double delta = problem.delta;
  StepResult res;

  const bool constrained = problem.b.size() > 0 && problem.b.squaredNorm() > 0.0;
  const CgResult sol_g = conjugate_gradient(problem.hvp, problem.g, cg);
  const double q = problem.g.dot(sol_g.x);

  auto plain_step = [&]() {
    if (q > 0.0) {
      res.lambda = std::sqrt(q / (2.0 * delta));
      res.direction = sol_g.x / res.lambda;
    } else {
      res.direction = Eigen::VectorXd::Zero(problem.g.size());
      res.lambda = 0.0;
    }
    res.nu = 0.0;
    res.mode = StepMode::feasible;
  };

  if (!constrained) {
    plain_step();
  } else {
    const CgResult sol_b = conjugate_gradient(problem.hvp, problem.b, cg);
    const double r = problem.g.dot(sol_b.x);
    const double s = problem.b.dot(sol_b.x);
    if (!(s > 0.0)) {
      throw SolverError("solve_step: degenerate constraint, b.H^-1.b = " + std::to_string(s));
    }
    const double c = problem.c;

    if (c * c / s > 2.0 * delta) {
      if (c > 0.0) {
        // No point of the trust region satisfies the constraint: fall back to
        // the steepest feasibility-recovery direction.
        res.mode = StepMode::infeasible_recovery;
        res.direction = -std::sqrt(2.0 * delta / s) * sol_b.x;
        res.lambda = 0.0;
        res.nu = std::sqrt(2.0 * delta / s);
      } else {
        // The whole trust region is strictly feasible: the constraint can
        // never activate.
        plain_step();
      }
    } else {
      // Dual case analysis.  nu(lambda) = max(0, (lambda c + r) / s); the
      // active branch (nu > 0) has objective A/(2 lambda) + B lambda / 2 - rc/s
      // with A = q - r^2/s, B = 2 delta - c^2/s; the inactive branch is the
      // plain KL-step dual.  Each candidate multiplier is projected onto the
      // interval where its branch is valid.
      const double A = std::max(q - r * r / s, 0.0);
      const double B = std::max(2.0 * delta - c * c / s, 1e-16);
      const double lam_active = std::sqrt(A / B);
      const double lam_inactive = q > 0.0 ? std::sqrt(q / (2.0 * delta)) : 0.0;
      const double inf = std::numeric_limits<double>::infinity();

      // Validity intervals for each branch in lambda >= 0.
      double alo = inf, ahi = -inf, blo = inf, bhi = -inf;
      if (c > 0.0) {
        if (r >= 0.0) {
          alo = 0.0; ahi = inf;  // nu > 0 everywhere
        } else {
          const double split = -r / c;
          alo = split; ahi = inf;
          blo = 0.0; bhi = split;
        }
      } else if (c < 0.0) {
        if (r <= 0.0) {
          blo = 0.0; bhi = inf;  // nu = 0 everywhere
        } else {
          const double split = -r / c;
          alo = 0.0; ahi = split;
          blo = split; bhi = inf;
        }
      } else {
        if (r > 0.0) { alo = 0.0; ahi = inf; }
        else { blo = 0.0; bhi = inf; }
      }

      double best = inf, best_lam = 0.0;
      bool best_active = false;
      const double ahi_cap = std::min(ahi, 1e12);
      if (alo <= ahi_cap) {
        const double lam = std::clamp(lam_active, alo, ahi_cap);
        const double val = dual_active(lam, A, B, r, c, s);
        if (val < best) { best = val; best_lam = lam; best_active = true; }
      }
      const double bhi_cap = std::min(bhi, 1e12);
      if (blo <= bhi_cap) {
        const double lam = std::clamp(lam_inactive, blo, bhi_cap);
        const double val = dual_inactive(lam, q, delta);
        if (val < best) { best = val; best_lam = lam; best_active = false; }
      }

      const double lam = std::max(best_lam, kTinyLambda);
      const double nu = best_active ? std::max(0.0, (lam * c + r) / s) : 0.0;
      res.direction = (sol_g.x - nu * sol_b.x) / lam;
      res.lambda = lam;
      res.nu = nu;
      res.mode = StepMode::feasible;
    }
    res.predicted_constraint_change = problem.b.dot(res.direction);
  }

  res.predicted_kl = 0.5 * res.direction.dot(problem.hvp(res.direction));
  return res;
}

LineSearchResult line_search(const Eigen::VectorXd& theta_k, const Eigen::VectorXd& direction,
                             const LineSearchEvaluators& eval, double delta, double slack_c,
                             bool from_infeasible, const LineSearchOptions& opts) {
  if (!eval.sampled_kl || !eval.reward_surrogate) {
    throw std::invalid_argument("line_search: missing evaluator");
  }
  const double reward_ref = eval.reward_surrogate(theta_k);
  const double cost_ref = eval.cost_surrogate ? eval.cost_surrogate(theta_k) : 0.0;
  const double cost_budget = std::max(-slack_c, 0.0);

  double scale = 1.0;
  for (int j = 0; j < opts.max_backtracks; ++j, scale *= opts.backtrack_coeff) {
    const Eigen::VectorXd theta = theta_k + scale * direction;
    const double kl = eval.sampled_kl(theta);
    if (!std::isfinite(kl) || kl > delta) continue;
    double cost_change = 0.0;
    if (eval.cost_surrogate) {
      const double cost_val = eval.cost_surrogate(theta);
      if (!std::isfinite(cost_val)) continue;
      cost_change = cost_val - cost_ref;
      if (cost_change > cost_budget) continue;
    }
    const double reward_val = eval.reward_surrogate(theta);
    if (!std::isfinite(reward_val)) continue;
    if (!from_infeasible && reward_val < reward_ref) continue;

    LineSearchResult res;
    res.theta = theta;
    res.accepted = true;
    res.backtracks = j;
    res.kl = kl;
    res.reward_change = reward_val - reward_ref;
    res.cost_change = cost_change;
    return res;
  }

  LineSearchResult res;
  res.theta = theta_k;
  res.accepted = false;
  res.backtracks = opts.max_backtracks;
  return res;
}

}  // namespace scpolab
