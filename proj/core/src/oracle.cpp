#include "ggq/oracle.hpp"

#include <vector>

#include <Eigen/Eigenvalues>

#include "ggq/csv.hpp"
#include "ggq/errors.hpp"
#include "ggq/greedy_gq.hpp"

namespace ggq {

StationaryModel build_stationary_model(const TabularMdp& mdp, const BehaviorPolicy& behavior,
                                       const FeatureMap& features) {
  if (features.n_states() != mdp.n_states || features.n_actions() != mdp.n_actions) {
    throw ConfigError("feature table shape does not match the MDP");
  }
  StationaryModel model;
  model.mu = stationary_distribution(state_action_chain(mdp, behavior));

  const auto n = static_cast<Eigen::Index>(features.n_features());
  model.C = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto phi = features.phi(s, a);
      model.C.noalias() += model.mu(static_cast<Eigen::Index>(mdp.pair_index(s, a))) * phi * phi.transpose();
    }
  }
  model.C = 0.5 * (model.C + model.C.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.C, Eigen::EigenvaluesOnly);
  model.lambda_min = eig.eigenvalues().minCoeff();
  if (!(model.lambda_min >= kSingularThreshold)) {
    throw AssumptionError(1, "C = E_mu[phi phi^T] is singular (smallest eigenvalue " +
                                 format_double(model.lambda_min) + ")");
  }
  model.C_inv = model.C.partialPivLu().inverse();
  return model;
}

TheoryConstants theory_constants(const StationaryModel& model, const PolicyConstants& constants,
                                 double radius, const TabularMdp& mdp) {
  if (!(radius > 0.0)) throw ConfigError("theory_constants: radius must be positive");
  const double gamma = mdp.gamma;
  const double inv_lambda = 1.0 / model.lambda_min;
  const double n_actions = static_cast<double>(mdp.n_actions);
  const double k1 = constants.k1;
  const double k2 = constants.k2;
  const double R = radius;
  const double r_max = mdp.r_max;

  TheoryConstants out;
  out.R = R;
  out.K = 2.0 * gamma * inv_lambda *
          ((k1 * n_actions * R + 1.0) * (1.0 + gamma + gamma * R * k1 * n_actions) +
           n_actions * (r_max + R + gamma * R) * (2.0 * k1 + k2 * R));
  const double bound_v = r_max + (1.0 + gamma) * R;
  out.c_f1 = bound_v + gamma * inv_lambda * bound_v * (1.0 + R * n_actions * k1);
  out.c_g1 = 2.0 * gamma * R * (1.0 + R * n_actions * k1);
  out.c_f2 = bound_v + inv_lambda * bound_v;
  out.c_g2 = 2.0 * R;
  return out;
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

Oracle::Oracle(TabularMdp mdp, FeatureMap features, StationaryModel model)
    : mdp_(std::move(mdp)), features_(std::move(features)), model_(std::move(model)),
      c_lu_(model_.C) {}

Oracle::Oracle(const TabularMdp& mdp, const BehaviorPolicy& behavior, const FeatureMap& features)
    : Oracle(mdp, features, build_stationary_model(mdp, behavior, features)) {}

void Oracle::check(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != n_features()) {
    throw ConfigError("theta has dimension " + std::to_string(theta.size()) + ", oracle expects " +
                      std::to_string(n_features()));
  }
}

Oracle::Sums Oracle::sums(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                          bool with_jacobian) const {
  check(theta);
  const auto n = static_cast<Eigen::Index>(n_features());
  std::vector<double> values(mdp_.n_states);
  std::vector<Eigen::VectorXd> grads(with_jacobian ? mdp_.n_states : 0);
  for (std::size_t next = 0; next < mdp_.n_states; ++next) {
    auto terms = next_state_terms(policy, theta, features_, next);
    values[next] = terms.v_bar;
    if (with_jacobian) grads[next] = std::move(terms.phi_hat);
  }

  Sums out{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(with_jacobian ? n : 0, with_jacobian ? n : 0)};
  Eigen::VectorXd mean_phat(n);
  for (std::size_t s = 0; s < mdp_.n_states; ++s) {
    for (std::size_t a = 0; a < mdp_.n_actions; ++a) {
      const double weight = model_.mu(static_cast<Eigen::Index>(mdp_.pair_index(s, a)));
      const auto phi = features_.phi(s, a);
      double mean_delta = -phi.dot(theta);
      if (with_jacobian) mean_phat.setZero();
      for (std::size_t next = 0; next < mdp_.n_states; ++next) {
        const double p = mdp_.p(s, a, next);
        if (p == 0.0) continue;
        mean_delta += p * (mdp_.r(s, a, next) + mdp_.gamma * values[next]);
        if (with_jacobian) mean_phat += p * grads[next];
      }
      out.v += weight * mean_delta * phi;
      if (with_jacobian) out.phat_phi.noalias() += weight * mean_phat * phi.transpose();
    }
  }
  return out;
}

Eigen::VectorXd Oracle::expected_delta_phi(const SoftmaxPolicy& policy,
                                           const Eigen::VectorXd& theta) const {
  return sums(policy, theta, false).v;
}

Eigen::MatrixXd Oracle::expected_phi_hat_phi(const SoftmaxPolicy& policy,
                                             const Eigen::VectorXd& theta) const {
  return sums(policy, theta, true).phat_phi;
}

Eigen::MatrixXd Oracle::delta_phi_jacobian(const SoftmaxPolicy& policy,
                                           const Eigen::VectorXd& theta) const {
  check(theta);
  const auto n = static_cast<Eigen::Index>(n_features());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < mdp_.n_states; ++s) {
    for (std::size_t a = 0; a < mdp_.n_actions; ++a) {
      const double weight = model_.mu(static_cast<Eigen::Index>(mdp_.pair_index(s, a)));
      for (std::size_t next = 0; next < mdp_.n_states; ++next) {
        const double p = mdp_.p(s, a, next);
        if (p == 0.0) continue;
        const Transition o{s, a, mdp_.r(s, a, next), next};
        jac.noalias() += (weight * p) * psi(policy, theta, features_, mdp_.gamma, o) *
                         features_.phi(s, a).transpose();
      }
    }
  }
  return jac;
}

Eigen::VectorXd Oracle::omega_star(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const {
  return c_lu_.solve(expected_delta_phi(policy, theta));
}

Eigen::VectorXd Oracle::normal_residual(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& omega) const {
  // Summed per pair so the residual is computed independently of C.
  check(theta);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features()));
  for (std::size_t s = 0; s < mdp_.n_states; ++s) {
    for (std::size_t a = 0; a < mdp_.n_actions; ++a) {
      const double weight = model_.mu(static_cast<Eigen::Index>(mdp_.pair_index(s, a)));
      const auto phi = features_.phi(s, a);
      for (std::size_t next = 0; next < mdp_.n_states; ++next) {
        const double p = mdp_.p(s, a, next);
        if (p == 0.0) continue;
        const Transition o{s, a, mdp_.r(s, a, next), next};
        const double delta = td_delta(policy, theta, features_, mdp_.gamma, o);
        out += (weight * p * (delta - phi.dot(omega))) * phi;
      }
    }
  }
  return out;
}

double Oracle::mspbe(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd v = expected_delta_phi(policy, theta);
  return v.dot(c_lu_.solve(v));
}

Eigen::VectorXd Oracle::grad_mspbe(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd v = expected_delta_phi(policy, theta);
  return 2.0 * delta_phi_jacobian(policy, theta) * (model_.C_inv * v);
}

Eigen::VectorXd Oracle::grad_mspbe_dual(const SoftmaxPolicy& policy,
                                        const Eigen::VectorXd& theta) const {
  const Sums s = sums(policy, theta, true);
  const Eigen::VectorXd omega = c_lu_.solve(s.v);
  return 2.0 * (-s.v + mdp_.gamma * s.phat_phi * omega);
}

Eigen::VectorXd Oracle::fd_gradient(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                    double h) const {
  return central_difference([&](const Eigen::VectorXd& x) { return mspbe(policy, x); }, theta, h);
}

OracleEval Oracle::evaluate(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const {
  const Sums s = sums(policy, theta, true);
  OracleEval out;
  out.omega_star = c_lu_.solve(s.v);
  out.j = s.v.dot(out.omega_star);
  // E[psi phi^T] = gamma E[phi_hat phi^T] - C
  out.grad_j = 2.0 * (mdp_.gamma * s.phat_phi - model_.C) * out.omega_star;
  return out;
}

double Oracle::zeta(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, const Transition& o) const {
  const OracleEval eval = evaluate(policy, theta);
  const Eigen::VectorXd g = update_direction(policy, theta, eval.omega_star, features_, mdp_.gamma, o);
  return eval.grad_j.dot(0.5 * eval.grad_j + g);
}

double Oracle::zeta_expectation(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const {
  const OracleEval eval = evaluate(policy, theta);
  double total = 0.0;
  for (std::size_t s = 0; s < mdp_.n_states; ++s) {
    for (std::size_t a = 0; a < mdp_.n_actions; ++a) {
      const double weight = model_.mu(static_cast<Eigen::Index>(mdp_.pair_index(s, a)));
      for (std::size_t next = 0; next < mdp_.n_states; ++next) {
        const double p = mdp_.p(s, a, next);
        if (p == 0.0) continue;
        const Transition o{s, a, mdp_.r(s, a, next), next};
        const Eigen::VectorXd g =
            update_direction(policy, theta, eval.omega_star, features_, mdp_.gamma, o);
        total += weight * p * eval.grad_j.dot(0.5 * eval.grad_j + g);
      }
    }
  }
  return total;
}

double Oracle::tracking_error(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& omega) const {
  return (omega - omega_star(policy, theta)).norm();
}

}  // namespace ggq
