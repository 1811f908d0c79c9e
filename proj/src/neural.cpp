#include "scpolab/neural.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace scpolab {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

void check_layer_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("mlp: layer sizes must be positive");
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  check_layer_sizes(sizes_);
  const int layers = static_cast<int>(sizes_.size()) - 1;
  weights_.resize(layers);
  biases_.resize(layers);
  for (int l = 0; l < layers; ++l) {
    weights_[l] = Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]);
    biases_[l] = Eigen::VectorXd::Zero(sizes_[l + 1]);
  }
}

void Mlp::init(Rng& rng, double final_layer_scale) {
  const int layers = static_cast<int>(weights_.size());
  for (int l = 0; l < layers; ++l) {
    const double bound = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) {
      for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) {
        weights_[l](i, j) = dist(rng);
      }
    }
    biases_[l].setZero();
  }
  if (layers > 0) weights_[layers - 1] *= final_layer_scale;
}

int Mlp::param_count() const {
  int n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<int>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

Eigen::VectorXd Mlp::flat() const {
  Eigen::VectorXd out(param_count());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::Index nw = weights_[l].size();
    out.segment(pos, nw) = Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), nw);
    pos += nw;
    out.segment(pos, biases_[l].size()) = biases_[l];
    pos += biases_[l].size();
  }
  return out;
}

void Mlp::set_flat(const Eigen::VectorXd& params) {
  if (params.size() != param_count()) throw std::invalid_argument("mlp: flat size mismatch");
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::Index nw = weights_[l].size();
    Eigen::Map<Eigen::VectorXd>(weights_[l].data(), nw) = params.segment(pos, nw);
    pos += nw;
    biases_[l] = params.segment(pos, biases_[l].size());
    pos += biases_[l].size();
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw std::invalid_argument("mlp: input size mismatch");
  Eigen::VectorXd h = x;
  const int layers = static_cast<int>(weights_.size());
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = weights_[l] * h + biases_[l];
    h = (l + 1 < layers) ? Eigen::VectorXd(z.array().tanh()) : std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim()) throw std::invalid_argument("mlp: input size mismatch");
  Eigen::MatrixXd h = X;
  const int layers = static_cast<int>(weights_.size());
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (h * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    h = (l + 1 < layers) ? Eigen::MatrixXd(z.array().tanh()) : std::move(z);
  }
  return h;
}

Eigen::VectorXd Mlp::vjp_batch(const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& out_cotangents) const {
  if (X.cols() != input_dim()) throw std::invalid_argument("mlp: input size mismatch");
  if (out_cotangents.rows() != X.rows() || out_cotangents.cols() != output_dim()) {
    throw std::invalid_argument("mlp: cotangent shape mismatch");
  }
  const int layers = static_cast<int>(weights_.size());
  std::vector<Eigen::MatrixXd> acts(layers + 1);
  acts[0] = X;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (acts[l] * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    acts[l + 1] = (l + 1 < layers) ? Eigen::MatrixXd(z.array().tanh()) : std::move(z);
  }

  Eigen::VectorXd grad(param_count());
  Eigen::Index pos = grad.size();
  Eigen::MatrixXd delta = out_cotangents;  // cotangent w.r.t. pre-activation of layer l
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd gw = delta.transpose() * acts[l];
    const Eigen::VectorXd gb = delta.colwise().sum().transpose();
    pos -= gb.size();
    grad.segment(pos, gb.size()) = gb;
    pos -= gw.size();
    grad.segment(pos, gw.size()) = Eigen::Map<const Eigen::VectorXd>(gw.data(), gw.size());
    if (l > 0) {
      const Eigen::MatrixXd back = delta * weights_[l];
      delta = back.array() * (1.0 - acts[l].array().square());
    }
  }
  return grad;
}

Eigen::MatrixXd Mlp::jvp_batch(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& tangent) const {
  if (X.cols() != input_dim()) throw std::invalid_argument("mlp: input size mismatch");
  if (tangent.size() != param_count()) throw std::invalid_argument("mlp: tangent size mismatch");
  const int layers = static_cast<int>(weights_.size());

  Eigen::MatrixXd h = X;
  Eigen::MatrixXd th = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  Eigen::Index pos = 0;
  for (int l = 0; l < layers; ++l) {
    const Eigen::Index nw = weights_[l].size();
    const Eigen::Map<const Eigen::MatrixXd> tw(tangent.data() + pos, weights_[l].rows(),
                                               weights_[l].cols());
    pos += nw;
    const auto tb = tangent.segment(pos, biases_[l].size());
    pos += biases_[l].size();

    Eigen::MatrixXd z = (h * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    Eigen::MatrixXd tz = (h * tw.transpose() + th * weights_[l].transpose()).rowwise() +
                         tb.transpose();
    if (l + 1 < layers) {
      h = z.array().tanh();
      th = tz.array() * (1.0 - h.array().square());
    } else {
      h = std::move(z);
      th = std::move(tz);
    }
  }
  return th;
}

GaussianPolicy GaussianPolicy::make(int obs_dim, int action_dim,
                                    const std::vector<int>& hidden, Rng& rng,
                                    double log_std_init) {
  std::vector<int> sizes;
  sizes.push_back(obs_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  GaussianPolicy p;
  p.mean_net = Mlp(sizes);
  p.mean_net.init(rng, 0.01);
  p.log_std = Eigen::VectorXd::Constant(action_dim, log_std_init);
  return p;
}

Eigen::VectorXd GaussianPolicy::flat() const {
  Eigen::VectorXd out(param_count());
  out << mean_net.flat(), log_std;
  return out;
}

void GaussianPolicy::set_flat(const Eigen::VectorXd& params) {
  if (params.size() != param_count()) throw std::invalid_argument("policy: flat size mismatch");
  mean_net.set_flat(params.head(mean_net.param_count()));
  log_std = params.tail(action_dim());
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& obs) const {
  return mean_net.forward(obs);
}

Eigen::VectorXd GaussianPolicy::sample(const Eigen::VectorXd& obs, Rng& rng) const {
  return sample_with_log_prob(obs, rng).first;
}

std::pair<Eigen::VectorXd, double> GaussianPolicy::sample_with_log_prob(
    const Eigen::VectorXd& obs, Rng& rng) const {
  const Eigen::VectorXd mu = mean(obs);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd action(action_dim());
  for (int j = 0; j < action_dim(); ++j) {
    action[j] = mu[j] + std::exp(log_std[j]) * unit(rng);
  }
  // Recompute the density from (obs, action) so stored log-probs match any
  // later re-evaluation bit for bit.
  double lp = 0.0;
  for (int j = 0; j < action_dim(); ++j) {
    const double z = (action[j] - mu[j]) / std::exp(log_std[j]);
    lp += -0.5 * z * z - log_std[j] - 0.5 * kLog2Pi;
  }
  return {std::move(action), lp};
}

double GaussianPolicy::log_prob(const Eigen::VectorXd& obs,
                                const Eigen::VectorXd& action) const {
  if (action.size() != action_dim()) throw std::invalid_argument("policy: action size mismatch");
  const Eigen::VectorXd mu = mean(obs);
  double lp = 0.0;
  for (int j = 0; j < action_dim(); ++j) {
    const double z = (action[j] - mu[j]) / std::exp(log_std[j]);
    lp += -0.5 * z * z - log_std[j] - 0.5 * kLog2Pi;
  }
  return lp;
}

Eigen::VectorXd GaussianPolicy::log_prob_batch(const Eigen::MatrixXd& obs,
                                               const Eigen::MatrixXd& actions) const {
  if (obs.rows() != actions.rows()) throw std::invalid_argument("policy: batch size mismatch");
  const Eigen::MatrixXd mu = mean_net.forward_batch(obs);
  const Eigen::ArrayXd sigma = log_std.array().exp();
  const Eigen::ArrayXXd z = (actions - mu).array().rowwise() / sigma.transpose();
  const double constant = -log_std.sum() - 0.5 * kLog2Pi * action_dim();
  return ((-0.5 * z.square()).rowwise().sum() + constant).matrix();
}

Eigen::VectorXd GaussianPolicy::grad_log_prob(const Eigen::VectorXd& obs,
                                              const Eigen::VectorXd& action) const {
  const Eigen::VectorXd mu = mean(obs);
  const Eigen::ArrayXd sigma = log_std.array().exp();
  const Eigen::ArrayXd z = (action - mu).array() / sigma;

  // d logp / d mu = z / sigma, backpropagated through the mean net.
  Eigen::MatrixXd cot(1, action_dim());
  cot.row(0) = (z / sigma).matrix().transpose();
  Eigen::VectorXd grad(param_count());
  grad.head(mean_net.param_count()) =
      mean_net.vjp_batch(obs.transpose(), cot);
  grad.tail(action_dim()) = (z.square() - 1.0).matrix();
  return grad;
}

Eigen::VectorXd GaussianPolicy::weighted_score_mean(const Eigen::MatrixXd& obs,
                                                    const Eigen::MatrixXd& actions,
                                                    const Eigen::VectorXd& coeff) const {
  const Eigen::Index n = obs.rows();
  if (actions.rows() != n || coeff.size() != n) {
    throw std::invalid_argument("policy: batch size mismatch");
  }
  if (n == 0) throw std::invalid_argument("policy: empty batch");
  const Eigen::MatrixXd mu = mean_net.forward_batch(obs);
  const Eigen::ArrayXd sigma = log_std.array().exp();
  const Eigen::ArrayXXd z = (actions - mu).array().rowwise() / sigma.transpose();

  const Eigen::ArrayXd scale = coeff.array() / static_cast<double>(n);
  const Eigen::MatrixXd cot =
      ((z.rowwise() / sigma.transpose()).colwise() * scale).matrix();
  Eigen::VectorXd grad(param_count());
  grad.head(mean_net.param_count()) = mean_net.vjp_batch(obs, cot);
  grad.tail(action_dim()) =
      ((z.square() - 1.0).colwise() * scale).colwise().sum().matrix().transpose();
  return grad;
}

double kl_diag_gaussian(const GaussianPolicy& policy_new,
                        const GaussianPolicy& policy_old,
                        const Eigen::MatrixXd& obs) {
  if (policy_new.action_dim() != policy_old.action_dim()) {
    throw std::invalid_argument("kl: action dimension mismatch");
  }
  if (obs.rows() == 0) throw std::invalid_argument("kl: empty batch");
  const Eigen::MatrixXd mu_new = policy_new.mean_net.forward_batch(obs);
  const Eigen::MatrixXd mu_old = policy_old.mean_net.forward_batch(obs);
  const Eigen::ArrayXd var_old = (2.0 * policy_old.log_std.array()).exp();
  const Eigen::ArrayXd var_new = (2.0 * policy_new.log_std.array()).exp();

  const double logdet_term = (policy_old.log_std - policy_new.log_std).sum();
  const double var_term = 0.5 * (var_new / var_old).sum();
  const Eigen::ArrayXXd dmu2 = (mu_new - mu_old).array().square();
  const double mean_term =
      (dmu2.rowwise() / (2.0 * var_old).transpose()).sum() / static_cast<double>(obs.rows());
  return logdet_term + var_term + mean_term - 0.5 * policy_new.action_dim();
}

Eigen::VectorXd kl_grad(const GaussianPolicy& policy_new,
                        const GaussianPolicy& policy_old,
                        const Eigen::MatrixXd& obs) {
  const Eigen::Index n = obs.rows();
  if (n == 0) throw std::invalid_argument("kl: empty batch");
  const Eigen::MatrixXd mu_new = policy_new.mean_net.forward_batch(obs);
  const Eigen::MatrixXd mu_old = policy_old.mean_net.forward_batch(obs);
  const Eigen::ArrayXd var_old = (2.0 * policy_old.log_std.array()).exp();
  const Eigen::ArrayXd var_new = (2.0 * policy_new.log_std.array()).exp();

  const Eigen::MatrixXd cot =
      (((mu_new - mu_old).array().rowwise() / var_old.transpose()) / static_cast<double>(n))
          .matrix();
  Eigen::VectorXd grad(policy_new.param_count());
  grad.head(policy_new.mean_net.param_count()) = policy_new.mean_net.vjp_batch(obs, cot);
  grad.tail(policy_new.action_dim()) = (var_new / var_old - 1.0).matrix();
  return grad;
}

ValueFunction ValueFunction::make(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> sizes;
  sizes.push_back(obs_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  ValueFunction v;
  v.net = Mlp(sizes);
  v.net.init(rng);
  return v;
}

double ValueFunction::predict(const Eigen::VectorXd& obs) const {
  return net.forward(obs)[0];
}

Eigen::VectorXd ValueFunction::predict_batch(const Eigen::MatrixXd& obs) const {
  return net.forward_batch(obs).col(0);
}

Eigen::VectorXd value_mse_grad(const ValueFunction& value, const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets) {
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw std::invalid_argument("value fit: empty batch");
  if (targets.size() != n) throw std::invalid_argument("value fit: target size mismatch");
  const Eigen::VectorXd pred = value.predict_batch(inputs);
  const Eigen::MatrixXd cot = (2.0 / static_cast<double>(n)) * (pred - targets);
  return value.net.vjp_batch(inputs, cot);
}

std::vector<double> adam_fit(ValueFunction& value, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets, int iterations,
                             double learning_rate) {
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw std::invalid_argument("value fit: empty batch");
  if (targets.size() != n) throw std::invalid_argument("value fit: target size mismatch");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  Eigen::VectorXd theta = value.net.flat();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  std::vector<double> trace;
  trace.reserve(iterations + 1);
  for (int t = 1; t <= iterations; ++t) {
    // one forward serves both the trace entry and the gradient's cotangent
    const Eigen::VectorXd resid = value.predict_batch(inputs) - targets;
    trace.push_back(resid.squaredNorm() / static_cast<double>(n));
    const Eigen::MatrixXd cot = (2.0 / static_cast<double>(n)) * resid;
    const Eigen::VectorXd g = value.net.vjp_batch(inputs, cot);
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    theta -= (learning_rate / bc1) *
             (m.array() / ((v.array() / bc2).sqrt() + eps)).matrix();
    value.net.set_flat(theta);
  }
  trace.push_back((value.predict_batch(inputs) - targets).squaredNorm() /
                  static_cast<double>(n));
  return trace;
}

}  // namespace scpolab
