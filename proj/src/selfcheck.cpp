#include "scpolab/selfcheck.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include <json.hpp>

#include "scpolab/advantage.hpp"
#include "scpolab/errors.hpp"
#include "scpolab/mmdp.hpp"
#include "scpolab/neural.hpp"
#include "scpolab/rng.hpp"
#include "scpolab/trust_region.hpp"

namespace scpolab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void record(SuiteReport& rep, double err, double tol, const std::string& what) {
  ++rep.cases;
  rep.max_error = std::max(rep.max_error, err);
  if (!(err <= tol)) {
    ++rep.failures;
    if (rep.notes.size() < 8) {
      rep.notes.push_back(what + ": error " + fmt(err) + " exceeds " + fmt(tol));
    }
  }
}

Eigen::VectorXd randn(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Eigen::MatrixXd randn_mat(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

// Central finite differences of a scalar function over a flat parameter
// vector, with per-coordinate step scaling.
Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& theta, double h0) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd t = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = h0 * std::max(1.0, std::abs(theta(i)));
    t(i) = theta(i) + h;
    const double fp = f(t);
    t(i) = theta(i) - h;
    const double fm = f(t);
    t(i) = theta(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

double rel_vec_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-12);
}

// --- suites -----------------------------------------------------------------

// Telescoping identity of the running-maximum augmentation: the summed
// increments of an episode reproduce its maximum cost (costs are
// non-negative, as every environment here produces).
SuiteReport suite_mmdp_identity(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "mmdp_identity";
  Rng rng(derive_seed(seed, 100));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal;
  for (int episode = 0; episode < 1000; ++episode) {
    const int len = 1 + static_cast<int>(rng() % 200);
    EpisodeBuffer buffer;
    AugmentedState aug;
    aug.base = Eigen::VectorXd::Zero(2);
    aug.max_costs = Eigen::VectorXd::Zero(1);
    double oracle_max = 0.0;  // brute force, independent of the increments
    for (int t = 0; t < len; ++t) {
      const double cost = uni(rng) < 0.5 ? 0.0 : std::abs(normal(rng)) * 3.0;
      oracle_max = std::max(oracle_max, cost);
      Eigen::VectorXd costs(1);
      costs(0) = cost;
      Transition tr;
      tr.state = aug;
      auto [next, inc] = augment_step(aug, aug.base, costs);
      tr.next_state = next;
      tr.costs = costs;
      tr.increments = inc;
      tr.done = t + 1 == len;
      buffer.transitions.push_back(tr);
      aug = next;
    }
    auto [sum_d, max_c] = episode_max_identity(buffer, 0);
    if (fault) sum_d += 1e-6;
    const double err = std::max(std::abs(sum_d - oracle_max), std::abs(max_c - oracle_max));
    record(rep, err, 1e-9, "episode " + std::to_string(episode) + " len " + std::to_string(len));
  }
  return rep;
}

SuiteReport suite_grad_log_prob(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "grad_log_prob";
  Rng rng(derive_seed(seed, 200));
  for (int point = 0; point < 20; ++point) {
    GaussianPolicy policy = GaussianPolicy::make(3, 2, {8}, rng, -0.3);
    GaussianPolicy scratch = policy;
    const Eigen::VectorXd theta = policy.flat() + 0.2 * randn(policy.param_count(), rng);
    policy.set_flat(theta);
    scratch.set_flat(theta);
    const Eigen::VectorXd obs = randn(3, rng);
    const Eigen::VectorXd action = randn(2, rng);

    Eigen::VectorXd analytic = policy.grad_log_prob(obs, action);
    if (fault) analytic(0) += 1e-2 * (1.0 + std::abs(analytic(0)));
    const Eigen::VectorXd fd = central_diff(
        [&](const Eigen::VectorXd& th) {
          scratch.set_flat(th);
          return scratch.log_prob(obs, action);
        },
        theta, 1e-6);
    record(rep, rel_vec_error(analytic, fd), 1e-4, "point " + std::to_string(point));
  }
  return rep;
}

SuiteReport suite_value_mse_grad(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "value_mse_grad";
  Rng rng(derive_seed(seed, 300));
  for (int point = 0; point < 20; ++point) {
    ValueFunction value = ValueFunction::make(3, {8}, rng);
    ValueFunction scratch = value;
    const Eigen::VectorXd theta = value.net.flat() + 0.2 * randn(value.net.param_count(), rng);
    value.net.set_flat(theta);
    const Eigen::MatrixXd inputs = randn_mat(16, 3, rng);
    const Eigen::VectorXd targets = randn(16, rng);

    Eigen::VectorXd analytic = value_mse_grad(value, inputs, targets);
    if (fault) analytic(0) += 1e-2 * (1.0 + std::abs(analytic(0)));
    const Eigen::VectorXd fd = central_diff(
        [&](const Eigen::VectorXd& th) {
          scratch.net.set_flat(th);
          return (scratch.predict_batch(inputs) - targets).squaredNorm() /
                 static_cast<double>(inputs.rows());
        },
        theta, 1e-6);
    record(rep, rel_vec_error(analytic, fd), 1e-4, "point " + std::to_string(point));
  }
  return rep;
}

SuiteReport suite_kl_grad(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "kl_grad";
  Rng rng(derive_seed(seed, 400));
  for (int point = 0; point < 20; ++point) {
    GaussianPolicy old_policy = GaussianPolicy::make(3, 2, {8}, rng, -0.3);
    GaussianPolicy new_policy = old_policy;
    const Eigen::VectorXd theta =
        old_policy.flat() + 0.2 * randn(old_policy.param_count(), rng);
    new_policy.set_flat(theta);
    GaussianPolicy scratch = new_policy;
    const Eigen::MatrixXd obs = randn_mat(8, 3, rng);

    Eigen::VectorXd analytic = kl_grad(new_policy, old_policy, obs);
    if (fault) analytic(0) += 1e-2 * (1.0 + std::abs(analytic(0)));
    const Eigen::VectorXd fd = central_diff(
        [&](const Eigen::VectorXd& th) {
          scratch.set_flat(th);
          return kl_diag_gaussian(scratch, old_policy, obs);
        },
        theta, 1e-6);
    record(rep, rel_vec_error(analytic, fd), 1e-4, "point " + std::to_string(point));
  }
  return rep;
}

// The curvature operator against a dense finite-difference Hessian of the
// sampled KL, plus symmetry and damping additivity, on a 24-parameter policy.
SuiteReport suite_fvp(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "fvp";
  Rng rng(derive_seed(seed, 500));
  GaussianPolicy policy = GaussianPolicy::make(2, 2, {4}, rng, -0.2);
  GaussianPolicy scratch = policy;
  const Eigen::MatrixXd obs = randn_mat(12, 2, rng);
  const Eigen::VectorXd theta = policy.flat();
  const int dim = policy.param_count();

  // Dense Hessian: finite differences of the exact KL gradient around theta.
  const double h = 1e-5;
  Eigen::MatrixXd hess(dim, dim);
  Eigen::VectorXd t = theta;
  for (int j = 0; j < dim; ++j) {
    t(j) = theta(j) + h;
    scratch.set_flat(t);
    const Eigen::VectorXd gp = kl_grad(scratch, policy, obs);
    t(j) = theta(j) - h;
    scratch.set_flat(t);
    const Eigen::VectorXd gm = kl_grad(scratch, policy, obs);
    t(j) = theta(j);
    hess.col(j) = (gp - gm) / (2.0 * h);
  }

  for (int case_i = 0; case_i < 10; ++case_i) {
    const Eigen::VectorXd v = randn(dim, rng);
    Eigen::VectorXd got = fisher_vector_product(policy, obs, v, 0.0);
    if (fault) got(0) += 1e-3 * (1.0 + std::abs(got(0)));
    const Eigen::VectorXd want = hess * v;
    record(rep, (got - want).cwiseAbs().maxCoeff(), 1e-5, "product " + std::to_string(case_i));
  }

  for (int case_i = 0; case_i < 10; ++case_i) {
    const Eigen::VectorXd u = randn(dim, rng);
    const Eigen::VectorXd v = randn(dim, rng);
    const double uhv = u.dot(fisher_vector_product(policy, obs, v, 0.0));
    const double vhu = v.dot(fisher_vector_product(policy, obs, u, 0.0));
    const double err = std::abs(uhv - vhu) / std::max({std::abs(uhv), std::abs(vhu), 1e-12});
    record(rep, err, 1e-8, "symmetry " + std::to_string(case_i));
  }

  {
    const Eigen::VectorXd v = randn(dim, rng);
    const Eigen::VectorXd with_damping = fisher_vector_product(policy, obs, v, 0.37);
    const Eigen::VectorXd without = fisher_vector_product(policy, obs, v, 0.0);
    record(rep, (with_damping - without - 0.37 * v).cwiseAbs().maxCoeff(), 1e-12,
           "damping additivity");
  }
  {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
    record(rep, fisher_vector_product(policy, obs, zero, 0.0).cwiseAbs().maxCoeff(), 0.0,
           "zero vector");
  }
  return rep;
}

SuiteReport suite_conjugate_gradient(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "conjugate_gradient";
  Rng rng(derive_seed(seed, 600));

  {
    const Eigen::Vector2d rhs(2.0, 4.0);
    const CgResult res = conjugate_gradient(
        [](const Eigen::VectorXd& v) { return Eigen::VectorXd(2.0 * v); }, rhs, CgOptions{10, 1e-12});
    record(rep, (res.x - Eigen::Vector2d(1.0, 2.0)).norm(), 1e-12, "2I system");
  }

  for (const int dim : {50, 120, 200}) {
    const Eigen::MatrixXd m = randn_mat(dim, dim, rng);
    const Eigen::MatrixXd a =
        m.transpose() * m / static_cast<double>(dim) + Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd rhs = randn(dim, rng);
    const Eigen::VectorXd dense = a.llt().solve(rhs);
    CgResult res = conjugate_gradient([&a](const Eigen::VectorXd& v) { return Eigen::VectorXd(a * v); },
                                      rhs, CgOptions{dim, 1e-12});
    if (fault) res.x(0) += 1e-3;
    record(rep, rel_vec_error(res.x, dense), 1e-6, "spd dim " + std::to_string(dim));
  }

  {
    const Eigen::VectorXd rhs = Eigen::VectorXd::Zero(7);
    const CgResult res = conjugate_gradient(
        [](const Eigen::VectorXd& v) { return Eigen::VectorXd(2.0 * v); }, rhs);
    record(rep, res.x.norm() + (res.converged ? 0.0 : 1.0), 0.0, "zero rhs");
  }

  {
    bool threw = false;
    try {
      conjugate_gradient([](const Eigen::VectorXd& v) { return Eigen::VectorXd(-v); },
                         Eigen::VectorXd::Ones(3));
    } catch (const SolverError&) {
      threw = true;
    }
    record(rep, threw ? 0.0 : 1.0, 0.0, "negative curvature raises");
  }
  return rep;
}

// Oracle for the trust-region subproblem restricted to the 2D span of
// H^-1 g and H^-1 b, where the optimum provably lives.  Maximizes
// alpha q + beta r over 0.5 (alpha^2 q + 2 alpha beta r + beta^2 s) <= delta
// and c + alpha r + beta s <= 0.  The optimum of a linear objective over this
// convex set sits either at the tangency point on the KL ellipse or at a
// corner where the cost line cuts the ellipse; both are closed-form.  A dense
// grid sweep over the span cross-checks the candidate algebra: grid points
// are all feasible, so the grid can approach the true maximum from below but
// never beat it.
double grid_oracle(double q, double r, double s, double c, double delta) {
  double best = -std::numeric_limits<double>::infinity();

  // Tangency of the objective on the KL ellipse: (alpha, beta) = (sqrt(2 delta / q), 0).
  const double alpha_t = std::sqrt(2.0 * delta / q);
  if (c + alpha_t * r <= 0.0) best = std::max(best, alpha_t * q);

  // Corners: substituting beta = (-c - r alpha) / s into the ellipse leaves
  // alpha^2 (q s - r^2) = 2 delta s - c^2.
  const double det = q * s - r * r;
  const double disc = 2.0 * delta * s - c * c;
  if (disc >= 0.0) {
    const double alpha_c = std::sqrt(disc / det);
    for (const double alpha : {alpha_c, -alpha_c}) {
      const double beta = (-c - r * alpha) / s;
      best = std::max(best, alpha * q + beta * r);
    }
  }

  const double amax = std::sqrt(2.0 * delta * s / det) * 1.000001;
  const double bmax = std::sqrt(2.0 * delta * q / det) * 1.000001;
  const int n = 240;
  double grid_best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double alpha = -amax + 2.0 * amax * i / n;
    for (int j = 0; j <= n; ++j) {
      const double beta = -bmax + 2.0 * bmax * j / n;
      const double kl = 0.5 * (alpha * alpha * q + 2.0 * alpha * beta * r + beta * beta * s);
      if (kl > delta) continue;
      if (c + alpha * r + beta * s > 0.0) continue;
      grid_best = std::max(grid_best, alpha * q + beta * r);
    }
  }
  // A grid point beating the candidate maximum means the candidate algebra is
  // wrong; surface that through the objective comparison instead of hiding it.
  if (grid_best > best + 1e-9 * (1.0 + std::abs(best))) return grid_best;
  return best;
}

SuiteReport suite_dual_step(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "dual_step";
  Rng rng(derive_seed(seed, 700));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int dim = 12;
  const CgOptions cg{400, 1e-12};

  auto make_instance = [&](Eigen::VectorXd& diag, Eigen::VectorXd& g, Eigen::VectorXd& b) {
    diag = Eigen::VectorXd::Ones(dim);
    for (int i = 0; i < dim; ++i) diag(i) = 0.3 + 3.0 * uni(rng);
    for (;;) {
      g = randn(dim, rng) * (0.5 + uni(rng));
      b = randn(dim, rng) * (0.5 + uni(rng));
      const Eigen::VectorXd u = g.cwiseQuotient(diag);
      const Eigen::VectorXd w = b.cwiseQuotient(diag);
      const double q = g.dot(u), r = g.dot(w), s = b.dot(w);
      if (q * s - r * r > 1e-3 * q * s) return;  // keep the span well-conditioned
    }
  };

  for (int case_i = 0; case_i < 50; ++case_i) {
    Eigen::VectorXd diag, g, b;
    make_instance(diag, g, b);
    const Eigen::VectorXd u = g.cwiseQuotient(diag);
    const Eigen::VectorXd w = b.cwiseQuotient(diag);
    const double q = g.dot(u), r = g.dot(w), s = b.dot(w);
    const double delta = 0.005 + 0.05 * uni(rng);
    const double c = uni(rng) < 0.5 ? -(0.02 + 0.5 * uni(rng))
                                    : std::sqrt(2.0 * delta * s) * (0.05 + 0.8 * uni(rng));

    TrustRegionProblem problem;
    problem.g = g;
    problem.b = b;
    problem.c = c;
    problem.delta = delta;
    problem.hvp = [diag](const Eigen::VectorXd& v) {
      return Eigen::VectorXd(diag.cwiseProduct(v));
    };
    const StepResult res = solve_step(problem, cg);

    const double kl = 0.5 * res.direction.dot(diag.cwiseProduct(res.direction));
    const double constr = c + b.dot(res.direction);
    double obj = g.dot(res.direction);
    if (fault) obj += 1e-2 * (1.0 + std::abs(obj));
    const double oracle = grid_oracle(q, r, s, c, delta);

    record(rep, std::max(kl - delta * (1.0 + 1e-6), 0.0), 1e-9,
           "kl feasibility case " + std::to_string(case_i));
    record(rep, std::max(constr, 0.0), 1e-6 * (1.0 + std::abs(c)),
           "constraint feasibility case " + std::to_string(case_i));
    record(rep, std::abs(obj - oracle) / std::max(std::abs(oracle), 1e-9), 1e-3,
           "objective case " + std::to_string(case_i));
  }

  for (int case_i = 0; case_i < 10; ++case_i) {
    Eigen::VectorXd diag, g, b;
    make_instance(diag, g, b);
    const Eigen::VectorXd w = b.cwiseQuotient(diag);
    const double s = b.dot(w);
    const double delta = 0.001 + 0.01 * uni(rng);
    const double c = std::sqrt(2.0 * delta * s) * (1.3 + uni(rng));

    TrustRegionProblem problem;
    problem.g = g;
    problem.b = b;
    problem.c = c;
    problem.delta = delta;
    problem.hvp = [diag](const Eigen::VectorXd& v) {
      return Eigen::VectorXd(diag.cwiseProduct(v));
    };
    const StepResult res = solve_step(problem, cg);
    const Eigen::VectorXd want = -std::sqrt(2.0 * delta / s) * w;
    const bool recovery = res.mode == StepMode::infeasible_recovery;
    const bool decreases = b.dot(res.direction) < 0.0;
    record(rep, (recovery && decreases) ? rel_vec_error(res.direction, want) : 1.0, 1e-8,
           "recovery case " + std::to_string(case_i));
  }

  for (int case_i = 0; case_i < 5; ++case_i) {
    Eigen::VectorXd diag, g, b;
    make_instance(diag, g, b);
    const Eigen::VectorXd u = g.cwiseQuotient(diag);
    const double q = g.dot(u);
    const double delta = 0.005 + 0.05 * uni(rng);
    TrustRegionProblem problem;
    problem.g = g;
    problem.delta = delta;
    problem.hvp = [diag](const Eigen::VectorXd& v) {
      return Eigen::VectorXd(diag.cwiseProduct(v));
    };
    const StepResult res = solve_step(problem, cg);
    const Eigen::VectorXd want = std::sqrt(2.0 * delta / q) * u;
    record(rep, rel_vec_error(res.direction, want), 1e-8,
           "unconstrained case " + std::to_string(case_i));
  }
  return rep;
}

SuiteReport suite_subsample(std::uint64_t seed, bool fault) {
  SuiteReport rep;
  rep.name = "subsample";
  Rng rng(derive_seed(seed, 800));
  std::normal_distribution<double> normal;

  auto run_case = [&](int zeros, int nonzeros, int expected, const std::string& what) {
    std::vector<double> targets;
    for (int i = 0; i < zeros; ++i) targets.push_back(0.0);
    for (int i = 0; i < nonzeros; ++i) targets.push_back(0.1 + std::abs(normal(rng)));
    std::shuffle(targets.begin(), targets.end(), rng);
    Rng sub(derive_seed(seed, 801));
    std::vector<int> keep = subsample_zero_targets(targets, sub);
    if (fault && !keep.empty()) keep.pop_back();

    int kept_zero = 0, kept_nonzero = 0;
    bool ascending = true;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (i > 0 && keep[i] <= keep[i - 1]) ascending = false;
      (targets[keep[i]] == 0.0 ? kept_zero : kept_nonzero)++;
    }
    const bool count_ok = static_cast<int>(keep.size()) == expected;
    const bool nonzero_ok = kept_nonzero == nonzeros;
    const bool balance_ok = zeros == 0 || nonzeros == 0 ||
                            kept_zero == std::min(zeros, nonzeros);
    record(rep, (count_ok && nonzero_ok && balance_ok && ascending) ? 0.0 : 1.0, 0.0, what);
  };

  run_case(90, 10, 20, "90 zeros + 10 nonzeros");
  run_case(5, 10, 15, "5 zeros + 10 nonzeros");
  run_case(100, 0, 1, "all zero keeps one");
  run_case(0, 12, 12, "no zeros");

  {
    std::vector<double> targets(40, 0.0);
    for (int i = 0; i < 12; ++i) targets[3 * i] = 1.0 + i;
    Rng a(derive_seed(seed, 802));
    Rng b(derive_seed(seed, 802));
    const bool same = subsample_zero_targets(targets, a) == subsample_zero_targets(targets, b);
    record(rep, same ? 0.0 : 1.0, 0.0, "seeded determinism");
  }
  return rep;
}

}  // namespace

const std::vector<std::string>& selfcheck_suite_names() {
  static const std::vector<std::string> names = {
      "mmdp_identity", "grad_log_prob", "value_mse_grad", "kl_grad",
      "fvp",           "conjugate_gradient", "dual_step",  "subsample"};
  return names;
}

std::vector<SuiteReport> run_selfcheck(const CheckOptions& opts) {
  const auto& names = selfcheck_suite_names();
  if (!opts.inject_fault.empty() &&
      std::find(names.begin(), names.end(), opts.inject_fault) == names.end()) {
    throw ConfigError("check: unknown fault target '" + opts.inject_fault + "'");
  }
  const auto fault = [&](const char* name) { return opts.inject_fault == name; };

  std::vector<SuiteReport> reports;
  reports.push_back(suite_mmdp_identity(opts.seed, fault("mmdp_identity")));
  reports.push_back(suite_grad_log_prob(opts.seed, fault("grad_log_prob")));
  reports.push_back(suite_value_mse_grad(opts.seed, fault("value_mse_grad")));
  reports.push_back(suite_kl_grad(opts.seed, fault("kl_grad")));
  reports.push_back(suite_fvp(opts.seed, fault("fvp")));
  reports.push_back(suite_conjugate_gradient(opts.seed, fault("conjugate_gradient")));
  reports.push_back(suite_dual_step(opts.seed, fault("dual_step")));
  reports.push_back(suite_subsample(opts.seed, fault("subsample")));
  return reports;
}

bool all_passed(const std::vector<SuiteReport>& reports) {
  for (const SuiteReport& rep : reports) {
    if (!rep.passed()) return false;
  }
  return true;
}

std::string selfcheck_report_json(const std::vector<SuiteReport>& reports) {
  nlohmann::json doc;
  doc["passed"] = all_passed(reports);
  doc["suites"] = nlohmann::json::array();
  for (const SuiteReport& rep : reports) {
    nlohmann::json entry;
    entry["name"] = rep.name;
    entry["cases"] = rep.cases;
    entry["failures"] = rep.failures;
    entry["max_error"] = rep.max_error;
    entry["notes"] = rep.notes;
    doc["suites"].push_back(entry);
  }
  return doc.dump(2);
}

}  // namespace scpolab
