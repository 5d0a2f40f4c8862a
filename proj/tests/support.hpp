#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ggq/experiments.hpp"
#include "ggq/linear_arch.hpp"
#include "ggq/mdp.hpp"

// Reference computations written independently of the library: direct linear
// solves and plain loops, no shared helpers.
namespace ggq::testing {

inline Problem uniform_problem(std::uint64_t seed = 1) {
  auto mdp = uniform_kernel_mdp(4, 2, 0.9, random_rewards(seed, 4, 2));
  return Problem::make("uniform", std::move(mdp), uniform_policy(4, 2), FeatureMap::random(seed, 4, 2, 2));
}

inline Problem random_problem(std::uint64_t seed, std::size_t n_features = 2) {
  return Problem::make("random-" + std::to_string(seed), random_mdp(seed, 4, 2, 0.9), random_policy(seed, 4, 2),
                       FeatureMap::random(seed + 1000, 4, 2, n_features));
}

// mu^T (P - I) = 0 with sum(mu) = 1, as one overdetermined least-squares solve.
inline Eigen::VectorXd reference_stationary(const Eigen::MatrixXd& chain) {
  const auto n = chain.rows();
  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) = chain.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  return A.colPivHouseholderQr().solve(rhs);
}

inline Eigen::MatrixXd reference_chain(const TabularMdp& mdp, const BehaviorPolicy& b) {
  const auto n = static_cast<Eigen::Index>(mdp.n_pairs());
  Eigen::MatrixXd m(n, n);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
        for (std::size_t a2 = 0; a2 < mdp.n_actions; ++a2)
          m(static_cast<Eigen::Index>(s * mdp.n_actions + a), static_cast<Eigen::Index>(s2 * mdp.n_actions + a2)) =
              mdp.kernel[(s * mdp.n_actions + a) * mdp.n_states + s2] * b.probs[s2 * mdp.n_actions + a2];
  return m;
}

inline std::vector<double> reference_softmax(double sigma, const Eigen::VectorXd& theta, const FeatureMap& f,
                                             std::size_t s) {
  std::vector<double> w(f.n_actions());
  double total = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    w[a] = std::exp(sigma * theta.dot(f.table().row(static_cast<Eigen::Index>(s * f.n_actions() + a)).transpose()));
    total += w[a];
  }
  for (double& x : w) x /= total;
  return w;
}

inline double reference_vbar(double sigma, const Eigen::VectorXd& theta, const FeatureMap& f, std::size_t s) {
  const auto pi = reference_softmax(sigma, theta, f, s);
  double v = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a)
    v += pi[a] * theta.dot(f.table().row(static_cast<Eigen::Index>(s * f.n_actions() + a)).transpose());
  return v;
}

struct ReferenceModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd C;
};

inline ReferenceModel reference_model(const Problem& p) {
  ReferenceModel m;
  m.mu = reference_stationary(reference_chain(p.mdp, p.behavior));
  const auto& t = p.features.table();
  m.C = Eigen::MatrixXd::Zero(t.cols(), t.cols());
  for (Eigen::Index i = 0; i < t.rows(); ++i) m.C += m.mu(i) * t.row(i).transpose() * t.row(i);
  return m;
}

// v = E_mu[delta phi] by a plain triple loop.
inline Eigen::VectorXd reference_v(const Problem& p, const ReferenceModel& m, double sigma,
                                   const Eigen::VectorXd& theta) {
  const auto& mdp = p.mdp;
  const auto& t = p.features.table();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(t.cols());
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto i = static_cast<Eigen::Index>(s * mdp.n_actions + a);
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        const double delta = mdp.r(s, a, s2) + mdp.gamma * reference_vbar(sigma, theta, p.features, s2) -
                             theta.dot(t.row(i).transpose());
        v += m.mu(i) * mdp.p(s, a, s2) * delta * t.row(i).transpose();
      }
    }
  return v;
}

inline double reference_j(const Problem& p, const ReferenceModel& m, double sigma, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd v = reference_v(p, m, sigma, theta);
  return v.dot(m.C.fullPivLu().solve(v));
}

inline Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                    double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = x(i);
    x(i) = x0 + h;
    const double up = f(x);
    x(i) = x0 - h;
    const double down = f(x);
    x(i) = x0;
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double floor = 1e-8) {
  return (got - want).norm() / std::max(want.norm(), floor);
}

}  // namespace ggq::testing
