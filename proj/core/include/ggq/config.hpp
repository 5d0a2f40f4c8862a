#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ggq/experiments.hpp"
#include "ggq/greedy_gq.hpp"

namespace ggq {

/// Parsed configuration document (JSON). Sections:
///
///   mdp              kind uniform|random|explicit, n_states, n_actions, gamma,
///                    r_max, seed, kernel [s][a][s'], reward [s][a] or [s][a][s']
///   behavior_policy  kind uniform|random|explicit, seed, min_prob, probs [s][a]
///   features         kind random|explicit, n_features, seed, table [s][a][i], normalize
///   target_policy    sigma
///   learner          theta0, omega0, s0, schedule {T, a, b} | {T, alpha, beta}
///                    (scalars or per-step arrays), projection_radius, divergence_threshold, seed
///   experiment       kind, sigmas, T_grid, a, b, a_grid, b_grid, n_seeds, seed, stride,
///                    allow_out_of_range, radius, mixing_horizon, generated_mdps
///   output           directory
///
/// Unknown keys anywhere are rejected. State ids are zero-based.
struct ConfigDocument {
  nlohmann::json raw;
  std::string digest;

  std::string experiment_kind = "run";
  double sigma = 1.0;
  std::vector<double> sigmas;
  std::vector<std::size_t> horizons;
  double a = 2.0 / 3.0;
  double b = 1.0 / 3.0;
  std::vector<double> a_grid;
  std::vector<double> b_grid;
  std::size_t n_seeds = 20;
  std::uint64_t seed = 0;
  std::size_t stride = 0;
  bool allow_out_of_range = false;
  double radius = 10.0;
  std::size_t mixing_horizon = 50;
  std::size_t generated_mdps = 0;
  std::optional<double> projection_radius;
  double divergence_threshold = 1e6;

  std::vector<double> theta0;
  std::vector<double> omega0;
  std::size_t s0 = 0;
  std::size_t horizon = 1000;
  std::optional<double> schedule_a;
  std::optional<double> schedule_b;
  /// Explicit stepsizes; one entry means constant.
  std::vector<double> alpha;
  std::vector<double> beta;
  std::uint64_t run_seed = 0;
  std::filesystem::path output_dir;
};

/// Throws ConfigError on malformed documents or unknown keys.
ConfigDocument parse_config(const nlohmann::json& doc);
ConfigDocument load_config(const std::filesystem::path& path);

/// FNV-1a digest of the canonical (sorted-key, compact) serialization.
std::string config_digest(const nlohmann::json& doc);

/// Builds and validates the MDP, behavior policy and features, then the oracle.
/// Throws ConfigError for invalid components and AssumptionError when C is
/// singular or features exceed unit norm.
Problem build_problem(const ConfigDocument& config);

/// Components without the oracle (no singular-C check).
struct Components {
  TabularMdp mdp;
  BehaviorPolicy behavior;
  FeatureMap features;
};
Components build_components(const ConfigDocument& config);

/// The configured problem plus `generated_mdps` random-kernel, random-behavior
/// instances with the same sizes and features (seeds mdp.seed + 1, + 2, ...).
std::vector<Problem> build_problem_set(const ConfigDocument& config);

LearnerInit learner_init(const ConfigDocument& config, std::size_t n_features);

/// Schedule of the single-run learner section.
StepSchedule learner_schedule(const ConfigDocument& config);

ExperimentConfig experiment_config(const ConfigDocument& config, std::size_t n_features);

}  // namespace ggq
