#include "scpolab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "scpolab/advantage.hpp"
#include "scpolab/checkpoint.hpp"
#include "scpolab/errors.hpp"
#include "scpolab/mmdp.hpp"
#include "scpolab/rng.hpp"
#include "scpolab/trust_region.hpp"

namespace scpolab {

namespace {

// Every stateful consumer draws from its own derived stream, so adding or
// removing one consumer (an extra value net, the sub-sampler) can never shift
// the rollouts of another algorithm under the same seed.
constexpr std::uint64_t kStreamPolicyInit = 1;
constexpr std::uint64_t kStreamValueInit = 2;
constexpr std::uint64_t kStreamCostValueInit = 3;
constexpr std::uint64_t kStreamEnvSeeds = std::uint64_t{1} << 32;
constexpr std::uint64_t kStreamActions = std::uint64_t{2} << 32;
constexpr std::uint64_t kStreamSubsample = std::uint64_t{3} << 32;

constexpr int kActionDim = 2;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Mean of one per-episode statistic over completed episodes; falls back to
// every episode when none completed (partial batches in tests).
template <typename Pick>
double episodic_mean(const BatchBuffer& buffer, Pick pick) {
  double sum = 0.0;
  int n = 0;
  for (const EpisodeStats& st : buffer.stats) {
    if (st.truncated) continue;
    sum += pick(st);
    ++n;
  }
  if (n == 0) {
    for (const EpisodeStats& st : buffer.stats) {
      sum += pick(st);
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double mean_episodic_d_sum(const BatchBuffer& buffer) {
  return episodic_mean(buffer, [](const EpisodeStats& s) { return s.d_sum; });
}

double compute_slack_c(const BatchBuffer& buffer, double w, bool epsilon_term,
                       double delta, int horizon,
                       const Eigen::VectorXd& cost_advantages) {
  if (buffer.steps() == 0) throw std::invalid_argument("compute_slack_c: empty buffer");
  double c = mean_episodic_d_sum(buffer) - w;
  if (epsilon_term && cost_advantages.size() > 0) {
    const double eps = cost_advantages.cwiseAbs().maxCoeff();
    c += 2.0 * (horizon + 1) * eps * std::sqrt(delta / 2.0);
  }
  return c;
}

std::string metrics_csv_header() {
  return "epoch,J_r,M_c,rho_c,max_statewise_cost,J_D_true,J_D_surrogate,"
         "mode,accepted,backtracks,kl,slack_c,predicted_dcost,realized_dcost,"
         "lagrange_multiplier";
}

std::string metrics_csv_row(const MetricsRow& row) {
  std::string out = std::to_string(row.epoch);
  for (double v : {row.J_r, row.M_c, row.rho_c, row.max_statewise_cost, row.J_D_true,
                   row.J_D_surrogate}) {
    out += ',';
    out += fmt(v);
  }
  out += ',';
  out += row.diag.mode;
  out += ',';
  out += std::to_string(row.diag.accepted ? 1 : 0);
  out += ',';
  out += std::to_string(row.diag.backtracks);
  for (double v : {row.diag.kl, row.diag.slack_c, row.diag.predicted_dcost,
                   row.diag.realized_dcost, row.diag.lagrange_multiplier}) {
    out += ',';
    out += fmt(v);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_last(const std::vector<double>& values, int n) {
  if (values.empty() || n <= 0) return std::numeric_limits<double>::quiet_NaN();
  const int k = std::min<int>(n, static_cast<int>(values.size()));
  double sum = 0.0;
  for (std::size_t i = values.size() - k; i < values.size(); ++i) sum += values[i];
  return sum / k;
}

Trainer::Trainer(const RunConfig& cfg) : cfg_(cfg), env_(cfg.env) {
  cfg_.validate();
  const int in_dim = cfg_.env.observation_dim() + cfg_.env.cost_dim();
  const std::vector<int> hidden{cfg_.hidden, cfg_.hidden};
  Rng policy_rng(derive_seed(cfg_.seed, kStreamPolicyInit));
  policy_ = GaussianPolicy::make(in_dim, kActionDim, hidden, policy_rng);
  Rng value_rng(derive_seed(cfg_.seed, kStreamValueInit));
  value_ = ValueFunction::make(in_dim, hidden, value_rng);
  if (cfg_.algo != AlgoKind::trpo) {
    Rng cost_rng(derive_seed(cfg_.seed, kStreamCostValueInit));
    cost_value_ = ValueFunction::make(in_dim, hidden, cost_rng);
    has_cost_value_ = true;
  }
  last_direction_ = Eigen::VectorXd::Zero(policy_.param_count());
}

BatchBuffer Trainer::collect_rollouts(int epoch) {
  const int n = cfg_.steps_per_epoch;
  const int obs_dim = cfg_.env.observation_dim() + cfg_.env.cost_dim();
  BatchBuffer buf;
  buf.epoch = epoch;
  buf.obs.resize(n, obs_dim);
  buf.actions.resize(n, kActionDim);
  buf.log_probs.resize(n);
  buf.rewards.resize(n);
  buf.costs.resize(n);
  buf.increments.resize(n);

  Rng action_rng(derive_seed(cfg_.seed, kStreamActions + static_cast<std::uint64_t>(epoch)));
  Rng env_seed_rng(derive_seed(cfg_.seed, kStreamEnvSeeds + static_cast<std::uint64_t>(epoch)));

  std::vector<Eigen::VectorXd> cut_rows;
  AugmentedState aug;
  EpisodeStats st;
  int episode_start = 0;

  auto begin_episode = [&]() {
    aug.base = env_.reset(env_seed_rng());
    aug.max_costs = Eigen::VectorXd::Zero(cfg_.env.cost_dim());
    st = EpisodeStats{};
  };
  begin_episode();

  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd row = aug.concat();
    auto [action, logp] = policy_.sample_with_log_prob(row, action_rng);
    const EnvStep s = env_.step(Eigen::Vector2d(action(0), action(1)));
    auto [next_aug, inc] = augment_step(aug, s.observation, s.costs);

    buf.obs.row(t) = row.transpose();
    buf.actions.row(t) = action.transpose();
    buf.log_probs(t) = logp;
    buf.rewards(t) = s.reward;
    buf.costs(t) = s.costs(0);
    buf.increments(t) = inc(0);

    st.return_sum += s.reward;
    st.cost_sum += s.costs(0);
    st.max_cost = std::max(st.max_cost, s.costs(0));
    st.d_sum += inc(0);
    ++st.length;
    aug = std::move(next_aug);

    if (s.done || t + 1 == n) {
      st.truncated = !s.done;
      buf.episodes.emplace_back(episode_start, t + 1);
      buf.stats.push_back(st);
      cut_rows.push_back(aug.concat());
      episode_start = t + 1;
      if (s.done && t + 1 < n) begin_episode();
    }
  }

  buf.cut_obs.resize(static_cast<Eigen::Index>(cut_rows.size()), obs_dim);
  for (std::size_t i = 0; i < cut_rows.size(); ++i) {
    buf.cut_obs.row(static_cast<Eigen::Index>(i)) = cut_rows[i].transpose();
  }
  return buf;
}

Eigen::VectorXd Trainer::reward_advantages(const BatchBuffer& buffer) {
  const int n = buffer.steps();
  Eigen::VectorXd adv(n);
  Eigen::VectorXd targets(n);
  const Eigen::VectorXd pred = value_.predict_batch(buffer.obs);

  for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
    const auto [a, b] = buffer.episodes[e];
    const int len = b - a;
    std::vector<double> rew(len);
    std::vector<double> vals(len + 1);
    for (int i = 0; i < len; ++i) {
      rew[i] = buffer.rewards(a + i);
      vals[i] = pred(a + i);
    }
    vals[len] = buffer.stats[e].truncated
                    ? value_.predict(buffer.cut_obs.row(static_cast<Eigen::Index>(e)).transpose())
                    : 0.0;
    const std::vector<double> adv_e = gae(rew, vals, cfg_.gamma, cfg_.lam);
    const std::vector<double> tgt_e = discounted_returns(rew, cfg_.gamma, vals[len]);
    for (int i = 0; i < len; ++i) {
      adv(a + i) = adv_e[i];
      targets(a + i) = tgt_e[i];
    }
  }
  adam_fit(value_, buffer.obs, targets, cfg_.value_iters, cfg_.value_lr);
  return adv;
}

Trainer::CostSide Trainer::cost_side(const BatchBuffer& buffer) {
  CostSide out;
  if (cfg_.algo == AlgoKind::trpo) return out;

  const bool any_cost = (buffer.costs.array() != 0.0).any();
  if (!any_cost) {
    // The batch carries no cost signal at all: the empirical constraint
    // estimate degenerates, so this update runs unconstrained and the cost
    // net keeps its parameters.
    if (cfg_.algo != AlgoKind::scpo) out.j_c = 0.0;
    return out;
  }

  const int n = buffer.steps();
  Eigen::VectorXd adv(n);
  Eigen::VectorXd targets(n);
  const Eigen::VectorXd pred = cost_value_.predict_batch(buffer.obs);

  if (cfg_.algo == AlgoKind::scpo) {
    for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
      const auto [a, b] = buffer.episodes[e];
      const int len = b - a;
      std::vector<double> inc(len);
      std::vector<double> vals(len + 1);
      for (int i = 0; i < len; ++i) {
        inc[i] = buffer.increments(a + i);
        vals[i] = pred(a + i);
      }
      vals[len] = 0.0;  // increments beyond the cut are taken as absent
      const std::vector<double> adv_e = gae(inc, vals, 1.0, cfg_.cost_lam);
      const std::vector<double> tgt_e = d_return_targets(inc);
      for (int i = 0; i < len; ++i) {
        adv(a + i) = adv_e[i];
        targets(a + i) = tgt_e[i];
      }
    }

    // Balance the heavily zero-skewed regression set before the refit.
    std::vector<double> tvec(targets.data(), targets.data() + n);
    Rng sub_rng(derive_seed(cfg_.seed,
                            kStreamSubsample + static_cast<std::uint64_t>(buffer.epoch)));
    const std::vector<int> keep = subsample_zero_targets(tvec, sub_rng);
    Eigen::MatrixXd kept_obs(static_cast<Eigen::Index>(keep.size()), buffer.obs.cols());
    Eigen::VectorXd kept_targets(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      kept_obs.row(static_cast<Eigen::Index>(i)) = buffer.obs.row(keep[i]);
      kept_targets(static_cast<Eigen::Index>(i)) = targets(keep[i]);
    }
    adam_fit(cost_value_, kept_obs, kept_targets, cfg_.value_iters, cfg_.value_lr);

    out.advantages = adv;
    out.b = policy_.weighted_score_mean(buffer.obs, buffer.actions, adv);
    out.epsilon_hat = adv.cwiseAbs().maxCoeff();
    return out;
  }

  // Discounted cumulative-cost side for the Lagrangian and CPO baselines.
  double jc_sum = 0.0;
  int jc_count = 0;
  for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
    const auto [a, b] = buffer.episodes[e];
    const int len = b - a;
    std::vector<double> cost(len);
    std::vector<double> vals(len + 1);
    for (int i = 0; i < len; ++i) {
      cost[i] = buffer.costs(a + i);
      vals[i] = pred(a + i);
    }
    const bool trunc = buffer.stats[e].truncated;
    vals[len] = trunc
                    ? cost_value_.predict(buffer.cut_obs.row(static_cast<Eigen::Index>(e)).transpose())
                    : 0.0;
    const std::vector<double> adv_e = gae(cost, vals, cfg_.gamma, cfg_.cost_lam);
    const std::vector<double> tgt_e = discounted_returns(cost, cfg_.gamma, vals[len]);
    for (int i = 0; i < len; ++i) {
      adv(a + i) = adv_e[i];
      targets(a + i) = tgt_e[i];
    }
    if (!trunc) {
      double jc = 0.0;
      for (int i = len - 1; i >= 0; --i) jc = cost[i] + cfg_.gamma * jc;
      jc_sum += jc;
      ++jc_count;
    }
  }
  adam_fit(cost_value_, buffer.obs, targets, cfg_.value_iters, cfg_.value_lr);

  out.advantages = adv;
  out.j_c = jc_count > 0 ? jc_sum / jc_count : 0.0;
  if (cfg_.algo == AlgoKind::cpo) {
    out.b = policy_.weighted_score_mean(buffer.obs, buffer.actions, adv);
  }
  return out;
}

UpdateDiagnostics Trainer::update(const BatchBuffer& buffer) {
  if (buffer.steps() == 0) throw std::invalid_argument("update: empty buffer");
  UpdateDiagnostics diag;
  const int horizon = cfg_.env.max_episode_steps;

  Eigen::VectorXd adv_r = reward_advantages(buffer);
  normalize_in_place(adv_r);
  const CostSide cost = cost_side(buffer);

  const double lambda_used = lagrange_multiplier_;
  Eigen::VectorXd adv_obj;
  if (cfg_.algo == AlgoKind::trpo_lagrangian) {
    if (cost.advantages.size() > 0) {
      adv_obj = (adv_r - lambda_used * cost.advantages) / (1.0 + lambda_used);
    } else {
      adv_obj = adv_r / (1.0 + lambda_used);
    }
    diag.lagrange_multiplier = lambda_used;
  } else {
    adv_obj = adv_r;
  }

  TrustRegionProblem problem;
  problem.g = policy_.weighted_score_mean(buffer.obs, buffer.actions, adv_obj);
  problem.delta = cfg_.delta;

  bool constrained = false;
  if (cfg_.algo == AlgoKind::scpo) {
    diag.slack_c = compute_slack_c(buffer, cfg_.cost_limit, cfg_.epsilon_term, cfg_.delta,
                                   horizon, cost.advantages);
    problem.c = diag.slack_c;
    if (cost.b.size() > 0) {
      problem.b = cost.b;
      constrained = true;
    }
  } else if (cfg_.algo == AlgoKind::cpo) {
    const double d_limit =
        cfg_.cost_limit * (1.0 - std::pow(cfg_.gamma, horizon + 1)) / (1.0 - cfg_.gamma);
    diag.slack_c = (std::isnan(cost.j_c) ? 0.0 : cost.j_c) - d_limit;
    problem.c = diag.slack_c;
    if (cost.b.size() > 0) {
      problem.b = cost.b;
      constrained = true;
    }
  }

  const Eigen::MatrixXd& obs = buffer.obs;
  problem.hvp = [this, &obs](const Eigen::VectorXd& v) {
    return fisher_vector_product(policy_, obs, v, cfg_.damping);
  };

  StepResult step;
  try {
    step = solve_step(problem, CgOptions{cfg_.cg_iters, cfg_.cg_tol});
  } catch (const SolverError&) {
    diag.mode = "skipped";
    last_direction_ = Eigen::VectorXd::Zero(policy_.param_count());
    if (cfg_.algo == AlgoKind::scpo) {
      double bound = mean_episodic_d_sum(buffer);
      if (cost.advantages.size() > 0) bound += cost.advantages.mean();
      pending_surrogate_ = bound;
    }
    return diag;
  }
  last_direction_ = step.direction;

  const Eigen::VectorXd theta_k = policy_.flat();
  GaussianPolicy scratch = policy_;
  const Eigen::VectorXd& logp_old = buffer.log_probs;
  const Eigen::MatrixXd& actions = buffer.actions;

  LineSearchEvaluators eval;
  eval.sampled_kl = [&](const Eigen::VectorXd& th) {
    scratch.set_flat(th);
    return kl_diag_gaussian(scratch, policy_, obs);
  };
  eval.reward_surrogate = [&](const Eigen::VectorXd& th) {
    scratch.set_flat(th);
    const Eigen::VectorXd lp = scratch.log_prob_batch(obs, actions);
    return (((lp - logp_old).array().exp()) * adv_obj.array()).mean();
  };
  if (constrained) {
    eval.cost_surrogate = [&](const Eigen::VectorXd& th) {
      scratch.set_flat(th);
      const Eigen::VectorXd lp = scratch.log_prob_batch(obs, actions);
      return (((lp - logp_old).array().exp()) * cost.advantages.array()).mean();
    };
  }

  const bool from_infeasible = step.mode == StepMode::infeasible_recovery;
  const LineSearchResult ls =
      line_search(theta_k, step.direction, eval, cfg_.delta, constrained ? problem.c : 0.0,
                  from_infeasible, LineSearchOptions{cfg_.backtrack_coeff, cfg_.backtracks});
  policy_.set_flat(ls.theta);

  diag.mode = !constrained ? "unconstrained" : (from_infeasible ? "recovery" : "feasible");
  diag.accepted = ls.accepted;
  diag.backtracks = ls.backtracks;
  diag.kl = ls.kl;
  if (constrained) {
    diag.realized_dcost = ls.cost_change;
    diag.predicted_dcost =
        ls.accepted ? std::pow(cfg_.backtrack_coeff, ls.backtracks) * step.predicted_constraint_change
                    : 0.0;
  }

  if (cfg_.algo == AlgoKind::scpo) {
    // Bound on the updated policy's expected maximum state-wise cost, checked
    // against next epoch's measurement.
    double bound = mean_episodic_d_sum(buffer);
    if (cost.advantages.size() > 0) {
      const Eigen::VectorXd lp = policy_.log_prob_batch(obs, actions);
      const double cost_surr =
          (((lp - logp_old).array().exp()) * cost.advantages.array()).mean();
      bound += cost_surr + 2.0 * (horizon + 1) * cost.epsilon_hat *
                               std::sqrt(0.5 * std::max(ls.kl, 0.0));
    }
    pending_surrogate_ = bound;
  }

  if (cfg_.algo == AlgoKind::trpo_lagrangian) {
    const double d_limit =
        cfg_.cost_limit * (1.0 - std::pow(cfg_.gamma, horizon + 1)) / (1.0 - cfg_.gamma);
    const double jc = std::isnan(cost.j_c) ? 0.0 : cost.j_c;
    lagrange_multiplier_ =
        std::max(0.0, lagrange_multiplier_ + cfg_.lagrangian_lr * (jc - d_limit));
  }
  return diag;
}

std::vector<MetricsRow> Trainer::run(const std::string& out_dir,
                                     const std::function<void(const MetricsRow&)>& on_epoch) {
  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_policy_checkpoint(policy_, out_dir + "/policy_init.ckpt");
    metrics.open(out_dir + "/metrics.csv", std::ios::trunc);
    if (!metrics) {
      throw std::runtime_error("trainer: cannot write metrics under '" + out_dir + "'");
    }
    metrics << metrics_csv_header() << '\n' << std::flush;
  }

  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(std::max(cfg_.epochs, 0)));
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const BatchBuffer buffer = collect_rollouts(epoch);
    MetricsRow row;
    row.epoch = epoch;
    row.J_r = episodic_mean(buffer, [](const EpisodeStats& s) { return s.return_sum; });
    row.M_c = episodic_mean(buffer, [](const EpisodeStats& s) { return s.cost_sum; });
    row.max_statewise_cost =
        episodic_mean(buffer, [](const EpisodeStats& s) { return s.max_cost; });
    row.J_D_true = mean_episodic_d_sum(buffer);
    cumulative_cost_ += buffer.costs.sum();
    cumulative_steps_ += buffer.steps();
    row.rho_c = cumulative_cost_ / cumulative_steps_;
    row.J_D_surrogate = pending_surrogate_;
    row.diag = update(buffer);
    rows.push_back(row);
    if (metrics.is_open()) metrics << metrics_csv_row(row) << '\n' << std::flush;
    if (on_epoch) on_epoch(row);
  }

  if (!out_dir.empty()) {
    save_policy_checkpoint(policy_, out_dir + "/policy.ckpt");
    save_value_checkpoint(value_, out_dir + "/value.ckpt");
    if (has_cost_value_) save_value_checkpoint(cost_value_, out_dir + "/cost_value.ckpt");

    nlohmann::json summary;
    summary["run_id"] = cfg_.run_id();
    summary["algo"] = to_string(cfg_.algo);
    summary["seed"] = cfg_.seed;
    summary["epochs"] = cfg_.epochs;
    summary["steps_per_epoch"] = cfg_.steps_per_epoch;
    summary["env_preset"] = cfg_.env_preset;
    summary["config"] = cfg_.canonical_text();
    summary["lagrange_multiplier"] = lagrange_multiplier_;
    if (!rows.empty()) {
      const MetricsRow& last = rows.back();
      summary["final"] = {{"epoch", last.epoch},
                          {"J_r", last.J_r},
                          {"M_c", last.M_c},
                          {"rho_c", last.rho_c},
                          {"max_statewise_cost", last.max_statewise_cost},
                          {"J_D_true", last.J_D_true}};
    } else {
      summary["final"] = nullptr;
    }
    std::ofstream sj(out_dir + "/summary.json");
    if (!sj) throw std::runtime_error("trainer: cannot write summary under '" + out_dir + "'");
    sj << summary.dump(2) << '\n';
  }
  return rows;
}

}  // namespace scpolab
