#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "scpolab/rng.hpp"

namespace scpolab {

// Fully-connected net with tanh hidden activations and a linear output.
// Parameters live in one flat vector (per layer: column-major weights, then
// biases) so trust-region updates can treat the whole net as a point in R^n.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes);

  // Xavier-uniform weights, zero biases; the last layer is scaled down so a
  // fresh policy starts near-deterministic around zero.
  void init(Rng& rng, double final_layer_scale = 1.0);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int param_count() const;
  const std::vector<int>& layer_sizes() const { return sizes_; }

  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const;  // rows = samples

  // Reverse mode: sum over samples of d(output_i . cotangent_i)/d(params).
  Eigen::VectorXd vjp_batch(const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& out_cotangents) const;

  // Forward mode: directional derivative of every output along a flat
  // parameter tangent.
  Eigen::MatrixXd jvp_batch(const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& tangent) const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // weights_[l] is (sizes_[l+1] x sizes_[l])
  std::vector<Eigen::VectorXd> biases_;
};

// Diagonal Gaussian policy: state-dependent mean from an Mlp, state-independent
// log standard deviations.  Flat layout: mean-net params, then log_std.
struct GaussianPolicy {
  Mlp mean_net;
  Eigen::VectorXd log_std;

  static GaussianPolicy make(int obs_dim, int action_dim,
                             const std::vector<int>& hidden, Rng& rng,
                             double log_std_init = -0.5);

  int obs_dim() const { return mean_net.input_dim(); }
  int action_dim() const { return static_cast<int>(log_std.size()); }
  int param_count() const { return mean_net.param_count() + action_dim(); }

  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);

  Eigen::VectorXd mean(const Eigen::VectorXd& obs) const;
  Eigen::VectorXd sample(const Eigen::VectorXd& obs, Rng& rng) const;
  std::pair<Eigen::VectorXd, double> sample_with_log_prob(const Eigen::VectorXd& obs,
                                                          Rng& rng) const;

  double log_prob(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const;
  Eigen::VectorXd log_prob_batch(const Eigen::MatrixXd& obs,
                                 const Eigen::MatrixXd& actions) const;

  // Exact flat-parameter gradient of log pi(action | obs).
  Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& obs,
                                const Eigen::VectorXd& action) const;

  // mean_i coeff[i] * grad log pi(action_i | obs_i); the surrogate gradient.
  Eigen::VectorXd weighted_score_mean(const Eigen::MatrixXd& obs,
                                      const Eigen::MatrixXd& actions,
                                      const Eigen::VectorXd& coeff) const;
};

// Mean over the batch of KL(new || old) between the two diagonal Gaussians.
double kl_diag_gaussian(const GaussianPolicy& policy_new,
                        const GaussianPolicy& policy_old,
                        const Eigen::MatrixXd& obs);

// Exact gradient of the above with respect to the new policy's parameters.
Eigen::VectorXd kl_grad(const GaussianPolicy& policy_new,
                        const GaussianPolicy& policy_old,
                        const Eigen::MatrixXd& obs);

struct ValueFunction {
  Mlp net;

  static ValueFunction make(int obs_dim, const std::vector<int>& hidden, Rng& rng);
  double predict(const Eigen::VectorXd& obs) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& obs) const;
};

// Exact flat-parameter gradient of mean((prediction - target)^2).
Eigen::VectorXd value_mse_grad(const ValueFunction& value,
                               const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets);

// Full-batch Adam on the MSE; fresh moment estimates per call.  Returns the
// loss trace (one entry per iteration, plus the final loss).
std::vector<double> adam_fit(ValueFunction& value, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets, int iterations,
                             double learning_rate);

}  // namespace scpolab
