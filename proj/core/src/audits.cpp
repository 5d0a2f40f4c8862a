#include "ggq/audits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ggq/csv.hpp"
#include "ggq/errors.hpp"
#include "ggq/greedy_gq.hpp"

namespace ggq {

namespace {

AuditResult make_result(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured, tolerance, measured <= tolerance, std::move(detail)};
}

double relative(const Eigen::VectorXd& value, const Eigen::VectorXd& reference) {
  return (value - reference).norm() / std::max(reference.norm(), 1e-8);
}

/// Second point of a pair: half the time a fresh ball draw, otherwise a small
/// perturbation of the first so local slopes are probed.
Eigen::VectorXd partner(CounterRng& rng, const Eigen::VectorXd& first, double radius) {
  const auto n = static_cast<std::size_t>(first.size());
  if (rng.uniform() < 0.5) return sample_ball(rng, n, radius);
  const double scale = radius * std::pow(10.0, -rng.uniform(1.0, 4.0));
  Eigen::VectorXd second = first + sample_ball(rng, n, scale);
  const double norm = second.norm();
  if (norm > radius) second *= radius / norm;
  return second;
}

}  // namespace

Eigen::VectorXd sample_ball(CounterRng& rng, std::size_t n, double radius) {
  // Gaussian direction (Box-Muller), radius u^(1/n).
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    x(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  const double norm = x.norm();
  if (norm == 0.0) return Eigen::VectorXd::Zero(x.size());
  return (radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n)) / norm) * x;
}

AuditResult audit_gradient(const Oracle& oracle, const SoftmaxPolicy& policy,
                           const std::vector<Eigen::VectorXd>& thetas, double h) {
  double worst = 0.0;
  for (const auto& theta : thetas) {
    worst = std::max(worst, relative(oracle.grad_mspbe(policy, theta), oracle.fd_gradient(policy, theta, h)));
  }
  return make_result("grad J vs central differences (rel)", worst, 1e-5);
}

AuditResult audit_gradient_duality(const Oracle& oracle, const SoftmaxPolicy& policy,
                                   const std::vector<Eigen::VectorXd>& thetas) {
  double worst = 0.0;
  for (const auto& theta : thetas) {
    worst = std::max(worst,
                     (oracle.grad_mspbe(policy, theta) - oracle.grad_mspbe_dual(policy, theta)).lpNorm<Eigen::Infinity>());
  }
  return make_result("Jacobian form vs two-sample form of grad J", worst, 1e-9);
}

AuditResult audit_omega_star(const Oracle& oracle, const SoftmaxPolicy& policy,
                             const std::vector<Eigen::VectorXd>& thetas) {
  double worst = 0.0;
  for (const auto& theta : thetas) {
    worst = std::max(worst, oracle.normal_residual(policy, theta, oracle.omega_star(policy, theta)).norm());
  }
  return make_result("omega* normal-equation residual", worst, 1e-10);
}

AuditResult audit_zeta_mean(const Oracle& oracle, const SoftmaxPolicy& policy,
                            const std::vector<Eigen::VectorXd>& thetas) {
  double worst = 0.0;
  for (const auto& theta : thetas) worst = std::max(worst, std::abs(oracle.zeta_expectation(policy, theta)));
  return make_result("E_mu[zeta(theta, O)] exact enumeration", worst, 1e-10);
}

AuditResult audit_phi_hat(const FeatureMap& features, const SoftmaxPolicy& policy,
                          const std::vector<Eigen::VectorXd>& thetas, double h) {
  double worst = 0.0;
  for (const auto& theta : thetas) {
    for (std::size_t s = 0; s < features.n_states(); ++s) {
      const Eigen::VectorXd fd =
          central_difference([&](const Eigen::VectorXd& x) { return v_bar(policy, x, features, s); }, theta, h);
      worst = std::max(worst, relative(phi_hat(policy, theta, features, s), fd));
    }
  }
  return make_result("phi_hat vs central differences of v_bar (rel)", worst, 1e-6);
}

AuditResult audit_phi_hat_bound(const FeatureMap& features, const SoftmaxPolicy& policy,
                                const PolicyConstants& constants, const std::vector<Eigen::VectorXd>& thetas) {
  double worst = 0.0;
  const double n_actions = static_cast<double>(features.n_actions());
  for (const auto& theta : thetas) {
    const double bound = n_actions * theta.norm() * constants.k1 + 1.0;
    for (std::size_t s = 0; s < features.n_states(); ++s) {
      worst = std::max(worst, phi_hat(policy, theta, features, s).norm() / bound);
    }
  }
  return make_result("||phi_hat|| / (|A| ||theta|| k1 + 1)", worst, 1.0);
}

AuditResult audit_policy_lipschitz(const FeatureMap& features, const SoftmaxPolicy& policy,
                                   const PolicyConstants& constants, std::size_t n_pairs, double radius,
                                   CounterRng& rng) {
  double worst = 0.0;
  const std::size_t n = features.n_features();
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd t1 = sample_ball(rng, n, radius);
    const Eigen::VectorXd t2 = partner(rng, t1, radius);
    const double dist = (t1 - t2).norm();
    if (dist == 0.0) continue;
    const auto s = static_cast<std::size_t>(rng.next_u64() % features.n_states());
    const auto a = static_cast<Eigen::Index>(rng.next_u64() % features.n_actions());
    const double diff =
        std::abs(softmax_probs(policy, t1, features, s)(a) - softmax_probs(policy, t2, features, s)(a));
    worst = std::max(worst, diff / (constants.k1 * dist));
  }
  return make_result("|pi1 - pi2| / (k1 ||dtheta||)", worst, 1.0, "k1 = " + format_double(constants.k1));
}

AuditResult audit_policy_smoothness(const FeatureMap& features, const SoftmaxPolicy& policy,
                                    const PolicyConstants& constants, std::size_t n_pairs, double radius,
                                    CounterRng& rng) {
  double worst = 0.0;
  const std::size_t n = features.n_features();
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd t1 = sample_ball(rng, n, radius);
    const Eigen::VectorXd t2 = partner(rng, t1, radius);
    const double dist = (t1 - t2).norm();
    if (dist == 0.0) continue;
    const auto s = static_cast<std::size_t>(rng.next_u64() % features.n_states());
    const auto a = static_cast<std::size_t>(rng.next_u64() % features.n_actions());
    const double diff =
        (softmax_grad(policy, t1, features, s, a) - softmax_grad(policy, t2, features, s, a)).norm();
    worst = std::max(worst, diff / (constants.k2 * dist));
  }
  return make_result("||grad pi1 - grad pi2|| / (k2 ||dtheta||)", worst, 1.0, "k2 = " + format_double(constants.k2));
}

AuditResult audit_update_lipschitz(const Oracle& oracle, const SoftmaxPolicy& policy,
                                   const PolicyConstants& constants, double radius, std::size_t n_samples,
                                   CounterRng& rng) {
  const auto& mdp = oracle.mdp();
  const auto& features = oracle.features();
  const std::size_t n = features.n_features();
  const double bound = mdp.gamma * (static_cast<double>(mdp.n_actions) * radius * constants.k1 + 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd theta = sample_ball(rng, n, radius);
    const Eigen::VectorXd w1 = sample_ball(rng, n, radius);
    const Eigen::VectorXd w2 = sample_ball(rng, n, radius);
    const double dist = (w1 - w2).norm();
    if (dist == 0.0) continue;
    const std::size_t s = rng.next_u64() % mdp.n_states;
    const std::size_t a = rng.next_u64() % mdp.n_actions;
    const std::size_t next = rng.next_u64() % mdp.n_states;
    const Transition o{s, a, mdp.r(s, a, next), next};
    const double diff = (update_direction(policy, theta, w1, features, mdp.gamma, o) -
                         update_direction(policy, theta, w2, features, mdp.gamma, o))
                            .norm();
    worst = std::max(worst, diff / (bound * dist));
  }
  return make_result("||G(theta,w1) - G(theta,w2)|| / (gamma(|A|Rk1+1) ||dw||)", worst, 1.0);
}

AuditResult audit_smoothness(const Oracle& oracle, const SoftmaxPolicy& policy,
                             const PolicyConstants& constants, double radius, std::size_t n_pairs,
                             CounterRng& rng) {
  const TheoryConstants theory = theory_constants(oracle.model(), constants, radius, oracle.mdp());
  const std::size_t n = oracle.n_features();
  double worst = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd t1 = sample_ball(rng, n, radius);
    const Eigen::VectorXd t2 = partner(rng, t1, radius);
    const double dist = (t1 - t2).norm();
    if (dist == 0.0) continue;
    const double diff = (oracle.evaluate(policy, t1).grad_j - oracle.evaluate(policy, t2).grad_j).norm();
    worst = std::max(worst, diff / dist);
  }
  return make_result("sampled Lipschitz ratio of grad J vs K", worst, theory.K,
                     "R = " + format_double(radius));
}

AuditResult audit_stationary(const Oracle& oracle, const BehaviorPolicy& behavior) {
  const Eigen::MatrixXd chain = state_action_chain(oracle.mdp(), behavior);
  const Eigen::VectorXd& mu = oracle.model().mu;
  const double residual = (chain.transpose() * mu - mu).lpNorm<1>();
  return make_result("||mu^T P - mu^T||_1", residual, 1e-12,
                     "lambda_min(C) = " + format_double(oracle.model().lambda_min));
}

AuditResult audit_mixing(const TabularMdp& mdp, const BehaviorPolicy& behavior, std::size_t horizon) {
  const MixingProfile profile = mixing_profile(mdp, behavior, horizon);
  double worst_increase = 0.0;
  for (std::size_t t = 1; t < profile.tv.size(); ++t) {
    worst_increase = std::max(worst_increase, profile.tv[t] - profile.tv[t - 1]);
  }
  std::ostringstream detail;
  if (profile.degenerate) {
    detail << "couples within " << profile.fit_points << " step(s); rho fit degenerate";
  } else {
    detail << "m = " << format_double(profile.fitted_m) << ", rho = " << format_double(profile.fitted_rho);
  }
  return make_result("TV profile monotonicity (max increase)", worst_increase, 1e-12, detail.str());
}

std::vector<AuditResult> run_audits(const Problem& problem, const SoftmaxPolicy& policy,
                                    const AuditOptions& options) {
  if (!problem.oracle) throw ConfigError("run_audits: problem has no oracle");
  const Oracle& oracle = *problem.oracle;
  const PolicyConstants constants = options.claimed_constants.value_or(policy_constants(policy));

  CounterRng rng(options.seed, 0x41554454);  // "AUDT"
  std::vector<Eigen::VectorXd> thetas;
  for (std::size_t i = 0; i < options.n_theta; ++i) {
    thetas.push_back(sample_ball(rng, oracle.n_features(), options.theta_radius));
  }

  std::vector<AuditResult> out;
  out.push_back(audit_stationary(oracle, problem.behavior));
  out.push_back(audit_mixing(problem.mdp, problem.behavior, options.mixing_horizon));
  out.push_back(audit_gradient(oracle, policy, thetas, options.fd_step));
  out.push_back(audit_gradient_duality(oracle, policy, thetas));
  out.push_back(audit_omega_star(oracle, policy, thetas));
  out.push_back(audit_zeta_mean(oracle, policy, thetas));
  out.push_back(audit_phi_hat(problem.features, policy, thetas, options.fd_step));
  out.push_back(audit_phi_hat_bound(problem.features, policy, constants, thetas));
  CounterRng policy_rng = rng.split(1);
  out.push_back(audit_policy_lipschitz(problem.features, policy, constants, options.n_policy_pairs,
                                       options.policy_radius, policy_rng));
  CounterRng smooth_rng = rng.split(2);
  out.push_back(audit_policy_smoothness(problem.features, policy, constants, options.n_policy_pairs,
                                        options.policy_radius, smooth_rng));
  CounterRng update_rng = rng.split(3);
  out.push_back(audit_update_lipschitz(oracle, policy, constants, options.radius, options.n_policy_pairs, update_rng));
  CounterRng k_rng = rng.split(4);
  out.push_back(audit_smoothness(oracle, policy, constants, options.radius, options.n_smooth_pairs, k_rng));
  return out;
}

}  // namespace ggq
