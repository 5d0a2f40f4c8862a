#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "ggq/mdp.hpp"

namespace ggq {

/// Table of feature vectors phi(s, a) in R^N, one row per (s, a) pair in
/// TabularMdp::pair_index order. Every row has Euclidean norm at most 1.
class FeatureMap {
 public:
  FeatureMap() = default;

  /// Throws AssumptionError(2) when some row norm exceeds 1, unless `normalize`
  /// is set, in which case the whole table is divided by its largest row norm
  /// and the factor is kept in scale().
  static FeatureMap from_table(std::size_t n_states, std::size_t n_actions, Eigen::MatrixXd table,
                               bool normalize = false);

  /// Entries uniform in [-1, 1], then the table is rescaled so the largest row
  /// norm is 1.
  static FeatureMap random(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                           std::size_t n_features);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t n_features() const noexcept { return static_cast<std::size_t>(table_.cols()); }

  auto phi(std::size_t s, std::size_t a) const {
    return table_.row(static_cast<Eigen::Index>(s * n_actions_ + a)).transpose();
  }
  const Eigen::MatrixXd& table() const noexcept { return table_; }
  double max_norm() const;
  /// Factor the input table was divided by (1 when untouched).
  double scale() const noexcept { return scale_; }

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  Eigen::MatrixXd table_;
  double scale_ = 1.0;
};

/// Boltzmann target policy pi_theta(a|s) proportional to exp(sigma theta^T phi(s,a)).
struct SoftmaxPolicy {
  double sigma = 1.0;

  explicit SoftmaxPolicy(double sigma_in);
};

/// Lipschitz (k1) and smoothness (k2) constants of pi_theta in theta.
struct PolicyConstants {
  double k1 = 0.0;
  double k2 = 0.0;
};

/// (2 sigma, 8 sigma^2) for softmax over features of norm at most 1.
PolicyConstants policy_constants(const SoftmaxPolicy& policy);

double q_value(const Eigen::VectorXd& theta, const FeatureMap& features, std::size_t s, std::size_t a);

/// Max-subtracted softmax; entries positive and summing to 1.
Eigen::VectorXd softmax_probs(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                              const FeatureMap& features, std::size_t s);

/// Gradient of pi_theta(a|s) in theta: sigma pi(a|s) (phi(s,a) - sum_a' pi(a'|s) phi(s,a')).
Eigen::VectorXd softmax_grad(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                             const FeatureMap& features, std::size_t s, std::size_t a);

/// sum_a pi_theta(a|s') theta^T phi(s', a).
double v_bar(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, const FeatureMap& features,
             std::size_t s_next);

/// Gradient of v_bar in theta:
/// sum_a theta^T phi(s',a) grad pi(a|s') + pi(a|s') phi(s',a).
Eigen::VectorXd phi_hat(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                        const FeatureMap& features, std::size_t s_next);

/// r + gamma v_bar(s') - theta^T phi(s, a).
double td_delta(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, const FeatureMap& features,
                double gamma, const Transition& o);

/// gamma phi_hat(s') - phi(s, a); the gradient of td_delta.
Eigen::VectorXd psi(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                    const FeatureMap& features, double gamma, const Transition& o);

/// v_bar and phi_hat for one next state, sharing the softmax evaluation.
struct NextStateTerms {
  double v_bar = 0.0;
  Eigen::VectorXd phi_hat;
};

NextStateTerms next_state_terms(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                const FeatureMap& features, std::size_t s_next);

}  // namespace ggq
