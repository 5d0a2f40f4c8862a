#include "ggq/linear_arch.hpp"

#include <cmath>

#include "ggq/errors.hpp"

namespace ggq {

namespace {

void check_theta(const Eigen::VectorXd& theta, const FeatureMap& features) {
  if (static_cast<std::size_t>(theta.size()) != features.n_features()) {
    throw ConfigError("theta has dimension " + std::to_string(theta.size()) + ", features have " +
                      std::to_string(features.n_features()));
  }
}

void check_state(std::size_t s, const FeatureMap& features) {
  if (s >= features.n_states()) throw std::out_of_range("state id out of range");
}

}  // namespace

FeatureMap FeatureMap::from_table(std::size_t n_states, std::size_t n_actions,
                                  Eigen::MatrixXd table, bool normalize) {
  if (static_cast<std::size_t>(table.rows()) != n_states * n_actions) {
    throw ConfigError("feature table has " + std::to_string(table.rows()) + " rows, expected " +
                      std::to_string(n_states * n_actions));
  }
  if (table.cols() == 0) throw ConfigError("feature table has no columns");
  if (!table.allFinite()) throw ConfigError("feature table has non-finite entries");
  FeatureMap map;
  map.n_states_ = n_states;
  map.n_actions_ = n_actions;
  map.table_ = std::move(table);
  const double norm = map.max_norm();
  if (norm > 1.0) {
    if (!normalize) {
      throw AssumptionError(2, "feature norm " + std::to_string(norm) + " exceeds 1");
    }
    map.table_ /= norm;
    map.scale_ = norm;
  }
  return map;
}

FeatureMap FeatureMap::random(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                              std::size_t n_features) {
  if (n_features == 0) throw ConfigError("n_features must be positive");
  CounterRng rng(seed, 0x46454154);  // "FEAT"
  Eigen::MatrixXd table(n_states * n_actions, n_features);
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) table(i, j) = rng.uniform(-1.0, 1.0);
  }
  FeatureMap map;
  map.n_states_ = n_states;
  map.n_actions_ = n_actions;
  const double norm = table.rowwise().norm().maxCoeff();
  map.table_ = table / norm;
  map.scale_ = norm;
  return map;
}

double FeatureMap::max_norm() const {
  return table_.size() == 0 ? 0.0 : table_.rowwise().norm().maxCoeff();
}

SoftmaxPolicy::SoftmaxPolicy(double sigma_in) : sigma(sigma_in) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("softmax sigma must be positive");
}

PolicyConstants policy_constants(const SoftmaxPolicy& policy) {
  return {2.0 * policy.sigma, 8.0 * policy.sigma * policy.sigma};
}

double q_value(const Eigen::VectorXd& theta, const FeatureMap& features, std::size_t s, std::size_t a) {
  check_theta(theta, features);
  if (s >= features.n_states() || a >= features.n_actions()) throw std::out_of_range("pair out of range");
  return features.phi(s, a).dot(theta);
}

Eigen::VectorXd softmax_probs(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                              const FeatureMap& features, std::size_t s) {
  check_theta(theta, features);
  check_state(s, features);
  const auto n_actions = static_cast<Eigen::Index>(features.n_actions());
  Eigen::VectorXd logits(n_actions);
  for (Eigen::Index a = 0; a < n_actions; ++a) {
    logits(a) = policy.sigma * features.phi(s, static_cast<std::size_t>(a)).dot(theta);
  }
  Eigen::VectorXd probs = (logits.array() - logits.maxCoeff()).exp().matrix();
  probs /= probs.sum();
  return probs;
}

Eigen::VectorXd softmax_grad(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                             const FeatureMap& features, std::size_t s, std::size_t a) {
  const Eigen::VectorXd probs = softmax_probs(policy, theta, features, s);
  if (a >= features.n_actions()) throw std::out_of_range("action id out of range");
  Eigen::VectorXd mean_phi = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t b = 0; b < features.n_actions(); ++b) {
    mean_phi += probs(static_cast<Eigen::Index>(b)) * features.phi(s, b);
  }
  return policy.sigma * probs(static_cast<Eigen::Index>(a)) * (features.phi(s, a) - mean_phi);
}

NextStateTerms next_state_terms(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                const FeatureMap& features, std::size_t s_next) {
  const Eigen::VectorXd probs = softmax_probs(policy, theta, features, s_next);
  const std::size_t n_actions = features.n_actions();

  Eigen::VectorXd mean_phi = Eigen::VectorXd::Zero(theta.size());
  double value = 0.0;
  for (std::size_t a = 0; a < n_actions; ++a) {
    const double p = probs(static_cast<Eigen::Index>(a));
    mean_phi += p * features.phi(s_next, a);
    value += p * features.phi(s_next, a).dot(theta);
  }
  // sum_a q_a grad pi_a = sigma sum_a pi_a q_a (phi_a - mean_phi)
  Eigen::VectorXd policy_term = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t a = 0; a < n_actions; ++a) {
    const double q = features.phi(s_next, a).dot(theta);
    policy_term += probs(static_cast<Eigen::Index>(a)) * q * (features.phi(s_next, a) - mean_phi);
  }
  return {value, policy.sigma * policy_term + mean_phi};
}

double v_bar(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, const FeatureMap& features,
             std::size_t s_next) {
  const Eigen::VectorXd probs = softmax_probs(policy, theta, features, s_next);
  double value = 0.0;
  for (std::size_t a = 0; a < features.n_actions(); ++a) {
    value += probs(static_cast<Eigen::Index>(a)) * features.phi(s_next, a).dot(theta);
  }
  return value;
}

Eigen::VectorXd phi_hat(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                        const FeatureMap& features, std::size_t s_next) {
  return next_state_terms(policy, theta, features, s_next).phi_hat;
}

double td_delta(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, const FeatureMap& features,
                double gamma, const Transition& o) {
  return o.r + gamma * v_bar(policy, theta, features, o.s_next) - q_value(theta, features, o.s, o.a);
}

Eigen::VectorXd psi(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                    const FeatureMap& features, double gamma, const Transition& o) {
  check_state(o.s, features);
  return gamma * phi_hat(policy, theta, features, o.s_next) - features.phi(o.s, o.a);
}

}  // namespace ggq
