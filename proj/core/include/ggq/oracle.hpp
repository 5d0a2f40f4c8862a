#pragma once

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

#include "ggq/linear_arch.hpp"
#include "ggq/mdp.hpp"

namespace ggq {

/// Population quantities under the behavior chain: mu over (s, a),
/// C = E_mu[phi phi^T], its inverse, and the smallest eigenvalue of C.
struct StationaryModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd C;
  Eigen::MatrixXd C_inv;
  double lambda_min = 0.0;
};

/// Smallest admissible eigenvalue of C.
inline constexpr double kSingularThreshold = 1e-10;

/// Throws AssumptionError(1) when lambda_min(C) < kSingularThreshold and
/// ErgodicityError when the behavior chain has no positive stationary law.
StationaryModel build_stationary_model(const TabularMdp& mdp, const BehaviorPolicy& behavior,
                                       const FeatureMap& features);

struct OracleEval {
  double j = 0.0;
  Eigen::VectorXd grad_j;
  Eigen::VectorXd omega_star;
};

/// Radius R of the parameter ball and the constants derived from it.
struct TheoryConstants {
  double K = 0.0;
  double R = 0.0;
  double c_f1 = 0.0;
  double c_g1 = 0.0;
  double c_f2 = 0.0;
  double c_g2 = 0.0;
};

TheoryConstants theory_constants(const StationaryModel& model, const PolicyConstants& constants,
                                 double radius, const TabularMdp& mdp);

/// Central differences of `f` at `x`, coordinate-wise, step h.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h);

/// Exact evaluator for MSPBE-related expectations. Every expectation is an
/// explicit sum over (s, a, s') weighted by mu(s, a) P(s'|s, a).
///
/// Immutable after construction; all methods are safe to call concurrently.
class Oracle {
 public:
  Oracle(TabularMdp mdp, FeatureMap features, StationaryModel model);
  Oracle(const TabularMdp& mdp, const BehaviorPolicy& behavior, const FeatureMap& features);

  const TabularMdp& mdp() const noexcept { return mdp_; }
  const FeatureMap& features() const noexcept { return features_; }
  const StationaryModel& model() const noexcept { return model_; }
  std::size_t n_features() const noexcept { return features_.n_features(); }

  /// E_mu[delta(theta) phi].
  Eigen::VectorXd expected_delta_phi(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// Jacobian of expected_delta_phi laid out as E_mu[psi phi^T]: entry (i, j)
  /// is d/dtheta_i of the j-th component.
  Eigen::MatrixXd delta_phi_jacobian(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// E_mu[phi_hat(S') phi(S, A)^T].
  Eigen::MatrixXd expected_phi_hat_phi(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// Solution of C omega = E_mu[delta phi] by pivoted LU.
  Eigen::VectorXd omega_star(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// E_mu[(delta(theta) - phi^T omega) phi]; zero at omega = omega_star(theta).
  Eigen::VectorXd normal_residual(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& omega) const;

  /// J(theta) = v^T C^{-1} v with v = E_mu[delta phi].
  double mspbe(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// 2 E_mu[psi phi^T] C^{-1} v, from the Jacobian of v.
  Eigen::VectorXd grad_mspbe(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// 2 (-v + gamma E_mu[phi_hat phi^T] omega*(theta)), the two-sample form.
  Eigen::VectorXd grad_mspbe_dual(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  Eigen::VectorXd fd_gradient(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                              double h = 1e-5) const;

  /// J, grad J and omega* in one pass.
  OracleEval evaluate(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// <grad J(theta), grad J(theta) / 2 + G(theta, omega*(theta); o)>: the
  /// per-sample bias of the update direction projected on the true gradient.
  double zeta(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, const Transition& o) const;

  /// Exact mu P-weighted average of zeta over every (s, a, s').
  double zeta_expectation(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta) const;

  /// ||omega - omega*(theta)||.
  double tracking_error(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& omega) const;

 private:
  struct Sums {
    Eigen::VectorXd v;         // E[delta phi]
    Eigen::MatrixXd phat_phi;  // E[phi_hat phi^T]
  };
  Sums sums(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta, bool with_jacobian) const;
  void check(const Eigen::VectorXd& theta) const;

  TabularMdp mdp_;
  FeatureMap features_;
  StationaryModel model_;
  Eigen::PartialPivLU<Eigen::MatrixXd> c_lu_;
};

}  // namespace ggq
