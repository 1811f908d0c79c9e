#pragma once

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "scpolab/config.hpp"
#include "scpolab/env.hpp"
#include "scpolab/neural.hpp"

namespace scpolab {

struct EpisodeStats {
  double return_sum = 0.0;
  double cost_sum = 0.0;
  double max_cost = 0.0;  // max over steps of the instantaneous cost
  double d_sum = 0.0;     // sum of running-maximum increments
  int length = 0;
  bool truncated = false;
};

// One epoch of experience in columnar form.  Observation rows are augmented
// with the running-maximum tag, so they can feed the networks directly.
struct BatchBuffer {
  int epoch = 0;
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs;  // behaviour log-density, recorded at sampling
  Eigen::VectorXd rewards;
  Eigen::VectorXd costs;
  Eigen::VectorXd increments;
  std::vector<std::pair<int, int>> episodes;  // [first, past-the-end) row ranges
  std::vector<EpisodeStats> stats;            // parallel to episodes
  Eigen::MatrixXd cut_obs;  // one row per episode: augmented obs after its last step

  int steps() const { return static_cast<int>(rewards.size()); }
  int num_episodes() const { return static_cast<int>(episodes.size()); }
};

struct UpdateDiagnostics {
  std::string mode = "unconstrained";  // feasible | recovery | unconstrained | skipped
  bool accepted = false;
  int backtracks = 0;
  double kl = 0.0;
  double slack_c = std::numeric_limits<double>::quiet_NaN();
  double predicted_dcost = std::numeric_limits<double>::quiet_NaN();
  double realized_dcost = std::numeric_limits<double>::quiet_NaN();
  double lagrange_multiplier = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsRow {
  int epoch = 0;
  double J_r = 0.0;                // mean episodic return
  double M_c = 0.0;                // mean episodic cost sum
  double rho_c = 0.0;              // cumulative cost / cumulative steps, all training
  double max_statewise_cost = 0.0; // mean over episodes of the episode max cost
  double J_D_true = 0.0;           // mean episodic increment sum
  double J_D_surrogate = std::numeric_limits<double>::quiet_NaN();  // bound carried
                                                                    // from the previous update
  UpdateDiagnostics diag;
};

// Mean episodic increment sum over completed episodes (all episodes when none
// completed).
double mean_episodic_d_sum(const BatchBuffer& buffer);

// Constraint slack c = J_D_hat + 2(H+1) eps sqrt(delta/2) - w, where eps is
// the batch max |cost-increment advantage|; the middle term is included only
// when epsilon_term is set (it vanishes anyway when cost_advantages is empty).
double compute_slack_c(const BatchBuffer& buffer, double w, bool epsilon_term,
                       double delta, int horizon,
                       const Eigen::VectorXd& cost_advantages);

// The CSV layout is a stability contract; see README.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

double median(std::vector<double> values);                    // empty -> NaN
double mean_last(const std::vector<double>& values, int n);   // empty -> NaN

class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  // Exactly steps_per_epoch transitions from a fresh environment reset,
  // episode-delimited, with the running-maximum augmentation applied.
  BatchBuffer collect_rollouts(int epoch);

  // One policy update from the buffer: value fits, surrogate-gradient
  // assembly per algorithm, trust-region solve, backtracking line search,
  // and (for the Lagrangian baseline) the multiplier ascent afterwards.
  UpdateDiagnostics update(const BatchBuffer& buffer);

  // Full loop.  With a non-empty out_dir: metrics.csv flushed per epoch,
  // policy/value checkpoints, summary.json.  Empty out_dir keeps everything
  // in memory.
  std::vector<MetricsRow> run(const std::string& out_dir,
                              const std::function<void(const MetricsRow&)>& on_epoch = {});

  const RunConfig& config() const { return cfg_; }
  const GaussianPolicy& policy() const { return policy_; }
  const ValueFunction& value() const { return value_; }
  const ValueFunction& cost_value() const { return cost_value_; }
  bool has_cost_value() const { return has_cost_value_; }
  double lagrange_multiplier() const { return lagrange_multiplier_; }

  // Unscaled solver direction of the most recent update, before line search.
  const Eigen::VectorXd& last_direction() const { return last_direction_; }

 private:
  struct CostSide {
    Eigen::VectorXd advantages;  // empty when the cost side carries no signal
    Eigen::VectorXd b;           // empty when the update is unconstrained
    double c = 0.0;
    double epsilon_hat = 0.0;
    double j_c = std::numeric_limits<double>::quiet_NaN();  // discounted cost return
  };

  Eigen::VectorXd reward_advantages(const BatchBuffer& buffer);  // also fits V
  CostSide cost_side(const BatchBuffer& buffer);                 // also fits the cost net

  RunConfig cfg_;
  PointNavEnv env_;
  GaussianPolicy policy_;
  ValueFunction value_;
  ValueFunction cost_value_;
  bool has_cost_value_ = false;
  double lagrange_multiplier_ = 0.0;
  double pending_surrogate_ = std::numeric_limits<double>::quiet_NaN();
  double cumulative_cost_ = 0.0;
  double cumulative_steps_ = 0.0;
  Eigen::VectorXd last_direction_;
};

}  // namespace scpolab
