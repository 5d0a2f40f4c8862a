#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ggq/greedy_gq.hpp"
#include "ggq/linear_arch.hpp"
#include "ggq/mdp.hpp"
#include "ggq/oracle.hpp"

namespace ggq {

/// One problem instance: MDP, behavior policy, features and the exact oracle
/// built from them.
struct Problem {
  std::string name;
  TabularMdp mdp;
  BehaviorPolicy behavior;
  FeatureMap features;
  std::shared_ptr<const Oracle> oracle;

  static Problem make(std::string name, TabularMdp mdp, BehaviorPolicy behavior, FeatureMap features);
};

struct ExperimentConfig {
  std::vector<double> sigmas{1.0};
  /// T grid. fig1_sweep and stepsize_grid use the first entry.
  std::vector<std::size_t> horizons{1000};
  std::vector<double> a_grid;
  std::vector<double> b_grid;
  /// Exponent pair for fig1_sweep and rate_study.
  double a = 2.0 / 3.0;
  double b = 1.0 / 3.0;
  bool allow_out_of_range = false;
  std::size_t n_seeds = 20;
  std::uint64_t base_seed = 0;
  std::size_t stride = 0;
  std::size_t jobs = 0;
  std::optional<double> projection_radius;
  double divergence_threshold = 1e6;
  LearnerInit init;

  /// Empty: nothing is written.
  std::filesystem::path output_dir;
  bool write_cell_files = true;
  std::string config_digest;
  /// Echoed verbatim into the manifest.
  nlohmann::json config_echo;
};

struct CellKey {
  double sigma = 0.0;
  double a = 0.0;
  double b = 0.0;
  std::size_t horizon = 0;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
  std::string label() const;
};

/// Pointwise mean and standard error of logged curves over seeds.
struct CurveStats {
  std::vector<std::size_t> t;
  std::vector<double> mean_grad_sq;
  std::vector<double> stderr_grad_sq;
  std::vector<double> mean_tracking_sq;
  std::vector<double> stderr_tracking_sq;
  std::size_t n = 0;
};

struct CellResult {
  CellKey key;
  CurveStats curves;
  /// Mean and standard error of ||grad J(theta_M)||^2 over seeds.
  double mean_selected_grad_sq = 0.0;
  double stderr_selected_grad_sq = 0.0;
  std::uint64_t seed_first = 0;
  std::uint64_t seed_last = 0;
  std::size_t completed = 0;
  std::vector<std::string> errors;

  double final_mean_grad_sq() const { return curves.mean_grad_sq.empty() ? 0.0 : curves.mean_grad_sq.back(); }
  double final_stderr_grad_sq() const {
    return curves.stderr_grad_sq.empty() ? 0.0 : curves.stderr_grad_sq.back();
  }
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::size_t points = 0;
  bool degenerate = false;
};

struct AggregateResult {
  std::string kind;
  std::vector<CellResult> cells;
  std::optional<RateFit> fit;
  /// Cell indices ordered by mean_selected_grad_sq (stepsize_grid).
  std::vector<std::size_t> ranking;
  bool partial = false;
  double wall_seconds = 0.0;
};

/// Welford mean/stderr over records sharing one config digest. Throws
/// ConfigError naming the offending seeds when logged lengths differ.
CurveStats aggregate(const std::vector<RunRecord>& records);

/// Ordinary least squares of log(y) on log(x); degenerate when fewer than two
/// strictly positive y remain.
RateFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

/// Runs n_seeds trajectories per sigma with (a, b, T = horizons[0]).
AggregateResult fig1_sweep(const Problem& problem, const ExperimentConfig& config);

/// Runs n_seeds trajectories per T with sigma = sigmas[0] and fits the slope of
/// log mean ||grad J(theta_M)||^2 against log T.
AggregateResult rate_study(const Problem& problem, const ExperimentConfig& config);

/// Every (a, b) with b <= a from the grids at T = horizons[0], ranked by mean
/// ||grad J(theta_M)||^2.
AggregateResult stepsize_grid(const Problem& problem, const ExperimentConfig& config);

struct NamedProfile {
  std::string name;
  std::optional<MixingProfile> profile;
  std::string error;
};

/// Mixing profile per problem; ergodicity failures are reported, not thrown.
std::vector<NamedProfile> mixing_report(const std::vector<Problem>& problems, std::size_t horizon);

/// Output writers. The aggregate CSV has columns
/// sigma,a,b,T,t,mean_grad_sq,stderr_grad_sq,mean_tracking_sq,stderr_tracking_sq
/// followed by config_digest,seed_first,seed_last.
void write_aggregate_csv(const AggregateResult& result, const std::string& digest,
                         const std::filesystem::path& path);
void write_summary_csv(const AggregateResult& result, const std::string& digest,
                       const std::filesystem::path& path);
void write_manifest(const AggregateResult& result, const ExperimentConfig& config,
                    const std::filesystem::path& path);
void write_mixing_csv(const std::vector<NamedProfile>& profiles, const std::filesystem::path& path);

/// Runs `count` independent tasks on up to `jobs` threads (0: hardware
/// concurrency). Exceptions escape only from `task` bodies that do not catch.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ggq
