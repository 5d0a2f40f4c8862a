#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ggq/experiments.hpp"
#include "ggq/linear_arch.hpp"
#include "ggq/oracle.hpp"
#include "ggq/rng.hpp"

namespace ggq {

/// One row of the property table: pass iff measured <= tolerance.
struct AuditResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct AuditOptions {
  std::uint64_t seed = 0;
  std::size_t n_theta = 20;
  double theta_radius = 3.0;
  std::size_t n_policy_pairs = 1000;
  double policy_radius = 5.0;
  /// Ball radius R for the smoothness audits.
  double radius = 10.0;
  std::size_t n_smooth_pairs = 200;
  double fd_step = 1e-5;
  std::size_t mixing_horizon = 50;
  /// Test hook: audit the policy bounds against these instead of the
  /// softmax constants.
  std::optional<PolicyConstants> claimed_constants;
};

/// Uniform draw from the l2 ball of `radius` in R^n.
Eigen::VectorXd sample_ball(CounterRng& rng, std::size_t n, double radius);

AuditResult audit_gradient(const Oracle& oracle, const SoftmaxPolicy& policy,
                           const std::vector<Eigen::VectorXd>& thetas, double h);
AuditResult audit_gradient_duality(const Oracle& oracle, const SoftmaxPolicy& policy,
                                   const std::vector<Eigen::VectorXd>& thetas);
AuditResult audit_omega_star(const Oracle& oracle, const SoftmaxPolicy& policy,
                             const std::vector<Eigen::VectorXd>& thetas);
AuditResult audit_zeta_mean(const Oracle& oracle, const SoftmaxPolicy& policy,
                            const std::vector<Eigen::VectorXd>& thetas);
AuditResult audit_phi_hat(const FeatureMap& features, const SoftmaxPolicy& policy,
                          const std::vector<Eigen::VectorXd>& thetas, double h);
AuditResult audit_phi_hat_bound(const FeatureMap& features, const SoftmaxPolicy& policy,
                                const PolicyConstants& constants, const std::vector<Eigen::VectorXd>& thetas);
/// Max over sampled (theta1, theta2, s, a) of |pi1 - pi2| / (k1 ||dtheta||).
AuditResult audit_policy_lipschitz(const FeatureMap& features, const SoftmaxPolicy& policy,
                                   const PolicyConstants& constants, std::size_t n_pairs, double radius,
                                   CounterRng& rng);
/// Max over the same sample of ||grad pi1 - grad pi2|| / (k2 ||dtheta||).
AuditResult audit_policy_smoothness(const FeatureMap& features, const SoftmaxPolicy& policy,
                                    const PolicyConstants& constants, std::size_t n_pairs, double radius,
                                    CounterRng& rng);
/// ||G(theta, w1) - G(theta, w2)|| / ||w1 - w2|| against gamma (|A| R k1 + 1).
AuditResult audit_update_lipschitz(const Oracle& oracle, const SoftmaxPolicy& policy,
                                   const PolicyConstants& constants, double radius, std::size_t n_samples,
                                   CounterRng& rng);
/// ||grad J(theta1) - grad J(theta2)|| / ||dtheta|| over the R-ball against K.
AuditResult audit_smoothness(const Oracle& oracle, const SoftmaxPolicy& policy,
                             const PolicyConstants& constants, double radius, std::size_t n_pairs,
                             CounterRng& rng);
AuditResult audit_stationary(const Oracle& oracle, const BehaviorPolicy& behavior);
AuditResult audit_mixing(const TabularMdp& mdp, const BehaviorPolicy& behavior, std::size_t horizon);

/// The full property table for one problem and target policy.
std::vector<AuditResult> run_audits(const Problem& problem, const SoftmaxPolicy& policy,
                                    const AuditOptions& options);

}  // namespace ggq
