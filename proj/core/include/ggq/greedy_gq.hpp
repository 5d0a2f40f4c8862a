#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ggq/linear_arch.hpp"
#include "ggq/mdp.hpp"
#include "ggq/oracle.hpp"
#include "ggq/rng.hpp"

namespace ggq {

/// Stepsizes for a horizon of T updates. Either constant exponent form
/// alpha = T^-a, beta = T^-b, or explicit per-step sequences.
class StepSchedule {
 public:
  /// Requires 1/2 < a <= 1 and 0 < b <= a unless `enforce_ranges` is false.
  static StepSchedule exponents(std::size_t horizon, double a, double b, bool enforce_ranges = true);
  static StepSchedule constant(std::size_t horizon, double alpha, double beta);
  /// `alpha` holds alpha_0..alpha_{T-1} and optionally alpha_T, which only
  /// weights the final iterate when drawing M (defaults to alpha_{T-1}).
  /// `beta` holds at least T entries.
  static StepSchedule sequences(std::size_t horizon, std::vector<double> alpha, std::vector<double> beta);

  std::size_t horizon() const noexcept { return horizon_; }
  double alpha(std::size_t t) const;
  double beta(std::size_t t) const;
  /// Weight of iterate k in P(M = k), k in 0..T.
  double iterate_weight(std::size_t k) const;
  std::optional<double> a() const noexcept { return a_; }
  std::optional<double> b() const noexcept { return b_; }

 private:
  std::size_t horizon_ = 0;
  std::vector<double> alpha_;
  std::vector<double> beta_;
  std::optional<double> a_;
  std::optional<double> b_;
};

struct LearnerState {
  Eigen::VectorXd theta;
  Eigen::VectorXd omega;
  std::size_t t = 0;
  std::size_t s = 0;
};

/// Optional l2-ball projection applied to theta and omega after every step.
struct Projection {
  std::optional<double> radius;
};

/// G(theta, omega; o) = delta(theta) phi_t - gamma (omega^T phi_t) phi_hat(theta).
Eigen::VectorXd update_direction(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& omega, const FeatureMap& features, double gamma,
                                 const Transition& o);

/// One Greedy-GQ update. Both parameters move from the same pre-update
/// (theta_t, omega_t):
///   theta += alpha_t G(theta_t, omega_t)
///   omega += beta_t (delta(theta_t) - phi_t^T omega_t) phi_t
LearnerState gq_step(const LearnerState& state, const Transition& o, const StepSchedule& schedule,
                     const SoftmaxPolicy& policy, const FeatureMap& features, double gamma,
                     const Projection& projection = {});

struct LearnerInit {
  std::size_t s0 = 0;
  Eigen::VectorXd theta0;
  Eigen::VectorXd omega0;
};

struct RunOptions {
  StepSchedule schedule;
  Projection projection;
  /// Diagnostics every `stride` steps; 0 picks 1 for T <= 10^4 and
  /// ceil(T / 10^4) otherwise. Step T is always logged.
  std::size_t stride = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  double divergence_threshold = 1e6;
};

std::size_t auto_stride(std::size_t horizon) noexcept;

/// Per-run log. Row k describes iterate t[k]; the diagnostic columns are NaN
/// when the run had no oracle.
struct RunRecord {
  std::vector<std::size_t> t;
  std::vector<double> j;
  std::vector<double> grad_norm_sq;
  std::vector<double> tracking_sq;
  std::vector<Eigen::VectorXd> theta_snapshots;
  std::vector<Eigen::VectorXd> omega_snapshots;

  Eigen::VectorXd theta_final;
  Eigen::VectorXd omega_final;
  std::size_t horizon = 0;
  std::size_t stride = 1;

  /// Randomized output: M drawn over 0..T from the schedule weights and
  /// theta_M captured during the run.
  std::size_t selected_iterate = 0;
  Eigen::VectorXd theta_selected;
  double selected_grad_norm_sq = 0.0;

  std::uint64_t seed = 0;
  std::string config_digest;
  std::string policy_label;
};

/// Stream ids derived from a run seed.
inline constexpr std::uint64_t kTrajectoryStream = 0;
inline constexpr std::uint64_t kIterateStream = 1;

/// Runs Greedy-GQ along one behavior trajectory from init.s0.
/// Deterministic in (inputs, options.seed). Throws DivergenceError when theta
/// or omega become non-finite or ||theta|| exceeds the divergence threshold.
RunRecord run(const TabularMdp& mdp, const BehaviorPolicy& behavior, const FeatureMap& features,
              const SoftmaxPolicy& target, const LearnerInit& init, const RunOptions& options,
              const Oracle* oracle = nullptr);

/// Draws k in 0..T with probability iterate_weight(k) / sum.
std::size_t sample_iterate_index(const StepSchedule& schedule, CounterRng& rng);

struct RandomIterate {
  std::size_t index = 0;
  Eigen::VectorXd theta;
};

/// Draws among the logged rows of `record`, weighting row t by alpha_t. With
/// stride 1 this is exactly P(M = k) = alpha_k / sum_t alpha_t.
RandomIterate select_random_iterate(const RunRecord& record, const StepSchedule& schedule,
                                    CounterRng& rng);

/// ||omega_t - omega*(theta_t)||.
double tracking_error(const LearnerState& state, const Oracle& oracle, const SoftmaxPolicy& policy);

/// CSV with header t,j,grad_norm_sq,tracking_sq.
void write_run_csv(const RunRecord& record, const std::filesystem::path& path);
/// JSON sidecar: config digest, seed, M, theta_final and friends.
void write_run_sidecar(const RunRecord& record, const std::filesystem::path& path);

}  // namespace ggq
