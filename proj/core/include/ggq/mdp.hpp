#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ggq/rng.hpp"

namespace ggq {

/// Finite MDP with transition-dependent rewards. Kernel and reward are stored
/// densely in [s][a][s'] order.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> kernel;
  std::vector<double> reward;
  double r_max = 1.0;
  double gamma = 0.9;

  std::size_t n_pairs() const noexcept { return n_states * n_actions; }
  std::size_t pair_index(std::size_t s, std::size_t a) const noexcept { return s * n_actions + a; }
  std::size_t triple_index(std::size_t s, std::size_t a, std::size_t next) const noexcept {
    return (s * n_actions + a) * n_states + next;
  }
  double p(std::size_t s, std::size_t a, std::size_t next) const { return kernel[triple_index(s, a, next)]; }
  double r(std::size_t s, std::size_t a, std::size_t next) const { return reward[triple_index(s, a, next)]; }

  /// E[r | s, a] under the kernel.
  double expected_reward(std::size_t s, std::size_t a) const;
};

/// Fixed data-collecting policy b[s][a], stored row-major.
struct BehaviorPolicy {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> probs;

  double operator()(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
};

/// One observed step O_t = (s_t, a_t, r_t, s_{t+1}).
struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const;
};

struct MixingProfile {
  std::vector<double> tv;
  double fitted_m = 0.0;
  double fitted_rho = 0.0;
  double fit_residual = 0.0;
  /// Number of leading tv entries used by the fit.
  std::size_t fit_points = 0;
  /// Set when fewer than two positive tv values exist (chain couples in one step).
  bool degenerate = false;
};

struct StationaryOptions {
  std::size_t max_iterations = 1'000'000;
  double tolerance = 1e-13;
};

/// Values below this are treated as exact zeros in the mixing fit.
inline constexpr double kTvZeroFloor = 1e-12;

ValidationReport validate_mdp(const TabularMdp& mdp);

/// With `require_positive`, every entry must be strictly positive.
ValidationReport validate_policy(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                 bool require_positive = false);

/// Transition matrix of the (s, a) chain: entry ((s,a),(s',a')) = P[s][a][s'] b[s'][a'].
Eigen::MatrixXd state_action_chain(const TabularMdp& mdp, const BehaviorPolicy& policy);

/// Invariant distribution of a row-stochastic matrix.
///
/// All rows of chain^k are driven together (repeated squaring, so the
/// iteration budget corresponds to the largest power reached) until they agree
/// within the tolerance, then the averaged row is polished by vector power
/// iteration. Throws ErgodicityError if the rows do not merge within budget or
/// some entry of the limit is not strictly positive.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain,
                                        const StationaryOptions& options = {});

MixingProfile mixing_profile(const Eigen::MatrixXd& chain, std::size_t horizon);
MixingProfile mixing_profile(const TabularMdp& mdp, const BehaviorPolicy& policy,
                             std::size_t horizon);

/// Least-squares fit of log(values[t]) = log(m) + t log(rho) over the prefix of
/// values above kTvZeroFloor.
void fit_geometric_decay(MixingProfile& profile);

Transition sample_transition(const TabularMdp& mdp, const BehaviorPolicy& policy, std::size_t s,
                             CounterRng& rng);

// Generators.

/// P(s'|s,a) = 1/n_states; reward r[s][a] broadcast over s'.
TabularMdp uniform_kernel_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                              const std::vector<double>& reward_sa, double r_max = 1.0);

/// Kernel rows are normalized uniform(0,1) draws; rewards r[s][a] uniform in [0, r_max].
TabularMdp random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                      double gamma, double r_max = 1.0);

/// Rewards r[s][a] uniform in [0, r_max], broadcast over s'.
std::vector<double> random_rewards(std::uint64_t seed, std::size_t n_states,
                                   std::size_t n_actions, double r_max = 1.0);

BehaviorPolicy uniform_policy(std::size_t n_states, std::size_t n_actions);

/// Rows are uniform(min_prob, 1) draws, normalized.
BehaviorPolicy random_policy(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                             double min_prob = 0.05);

/// Broadcast r[s][a] to r[s][a][s'].
std::vector<double> broadcast_reward(std::size_t n_states, std::size_t n_actions,
                                     const std::vector<double>& reward_sa);

}  // namespace ggq
