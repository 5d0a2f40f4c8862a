#include "ggq/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "ggq/csv.hpp"
#include "ggq/errors.hpp"

namespace ggq {

Problem Problem::make(std::string name, TabularMdp mdp, BehaviorPolicy behavior, FeatureMap features) {
  Problem problem{std::move(name), std::move(mdp), std::move(behavior), std::move(features), nullptr};
  problem.oracle = std::make_shared<const Oracle>(problem.mdp, problem.behavior, problem.features);
  return problem;
}

std::string CellKey::label() const {
  return "sigma-" + format_double(sigma) + "_a-" + format_double(a) + "_b-" + format_double(b) + "_T-" +
         std::to_string(horizon);
}

namespace {

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double stderr_of_mean() const {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
};

}  // namespace

CurveStats aggregate(const std::vector<RunRecord>& records) {
  CurveStats out;
  if (records.empty()) return out;
  const auto& first = records.front();
  std::vector<std::uint64_t> mismatched;
  for (const auto& r : records) {
    if (r.t != first.t || r.grad_norm_sq.size() != first.t.size() || r.tracking_sq.size() != first.t.size()) {
      mismatched.push_back(r.seed);
    }
  }
  if (!mismatched.empty()) {
    std::string seeds;
    for (auto s : mismatched) seeds += (seeds.empty() ? "" : ", ") + std::to_string(s);
    throw ConfigError("aggregate: logged lengths differ from seed " + std::to_string(first.seed) +
                      " for seeds " + seeds);
  }
  const std::size_t rows = first.t.size();
  out.t = first.t;
  out.n = records.size();
  out.mean_grad_sq.resize(rows);
  out.stderr_grad_sq.resize(rows);
  out.mean_tracking_sq.resize(rows);
  out.stderr_tracking_sq.resize(rows);

  // Summation order is fixed by seed so the result does not depend on the
  // order records arrive in.
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return records[l].seed < records[r].seed; });

  for (std::size_t k = 0; k < rows; ++k) {
    Welford grad;
    Welford track;
    for (auto i : order) {
      grad.add(records[i].grad_norm_sq[k]);
      track.add(records[i].tracking_sq[k]);
    }
    out.mean_grad_sq[k] = grad.mean;
    out.stderr_grad_sq[k] = grad.stderr_of_mean();
    out.mean_tracking_sq[k] = track.mean;
    out.stderr_tracking_sq[k] = track.stderr_of_mean();
  }
  return out;
}

RateFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("fit_log_log: size mismatch");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  RateFit fit;
  fit.points = lx.size();
  if (lx.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) {
    fit.degenerate = true;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

std::vector<CellResult> run_cells(const Problem& problem, const ExperimentConfig& config,
                                  const std::vector<CellKey>& keys) {
  if (config.n_seeds == 0) throw ConfigError("n_seeds must be at least 1");
  if (!problem.oracle) throw ConfigError("problem has no oracle");

  // Check every cell's schedule before launching anything.
  for (const auto& key : keys) {
    (void)StepSchedule::exponents(key.horizon, key.a, key.b, !config.allow_out_of_range);
  }

  const std::size_t n_seeds = config.n_seeds;
  const std::size_t n_tasks = keys.size() * n_seeds;
  std::vector<std::optional<RunRecord>> records(n_tasks);
  std::vector<std::string> errors(n_tasks);

  parallel_for(n_tasks, config.jobs, [&](std::size_t task) {
    const CellKey& key = keys[task / n_seeds];
    const std::uint64_t seed = config.base_seed + task % n_seeds;
    try {
      RunOptions options{StepSchedule::exponents(key.horizon, key.a, key.b, !config.allow_out_of_range),
                         Projection{config.projection_radius},
                         config.stride,
                         seed,
                         config.config_digest,
                         config.divergence_threshold};
      RunRecord record = run(problem.mdp, problem.behavior, problem.features, SoftmaxPolicy(key.sigma),
                             config.init, options, problem.oracle.get());
      if (!config.output_dir.empty() && config.write_cell_files) {
        const auto dir = config.output_dir / "cells" / key.label();
        write_run_csv(record, dir / ("seed-" + std::to_string(seed) + ".csv"));
        write_run_sidecar(record, dir / ("seed-" + std::to_string(seed) + ".json"));
      }
      record.theta_snapshots.clear();
      record.omega_snapshots.clear();
      records[task] = std::move(record);
    } catch (const std::exception& e) {
      errors[task] = "seed " + std::to_string(seed) + ": " + e.what();
    }
  });

  std::vector<CellResult> cells;
  cells.reserve(keys.size());
  for (std::size_t c = 0; c < keys.size(); ++c) {
    CellResult cell;
    cell.key = keys[c];
    cell.seed_first = config.base_seed;
    cell.seed_last = config.base_seed + n_seeds - 1;
    std::vector<RunRecord> done;
    Welford selected;
    for (std::size_t k = 0; k < n_seeds; ++k) {
      const std::size_t task = c * n_seeds + k;
      if (records[task]) {
        selected.add(records[task]->selected_grad_norm_sq);
        done.push_back(std::move(*records[task]));
      } else {
        cell.errors.push_back(errors[task]);
      }
    }
    cell.completed = done.size();
    cell.curves = aggregate(done);
    cell.mean_selected_grad_sq = selected.mean;
    cell.stderr_selected_grad_sq = selected.stderr_of_mean();
    cells.push_back(std::move(cell));
  }
  return cells;
}

void finish(AggregateResult& result, const ExperimentConfig& config,
            std::chrono::steady_clock::time_point start) {
  for (const auto& cell : result.cells) {
    if (!cell.errors.empty()) result.partial = true;
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (config.output_dir.empty()) return;
  write_aggregate_csv(result, config.config_digest, config.output_dir / "aggregate.csv");
  write_summary_csv(result, config.config_digest, config.output_dir / "summary.csv");
  write_manifest(result, config, config.output_dir / "manifest.json");
}

}  // namespace

AggregateResult fig1_sweep(const Problem& problem, const ExperimentConfig& config) {
  if (config.sigmas.empty()) throw ConfigError("fig1_sweep: sigma list is empty");
  if (config.horizons.empty()) throw ConfigError("fig1_sweep: T grid is empty");
  const auto start = std::chrono::steady_clock::now();
  std::vector<CellKey> keys;
  for (double sigma : config.sigmas) keys.push_back({sigma, config.a, config.b, config.horizons.front()});
  AggregateResult result{"sweep", run_cells(problem, config, keys), std::nullopt, {}, false, 0.0};
  finish(result, config, start);
  return result;
}

AggregateResult rate_study(const Problem& problem, const ExperimentConfig& config) {
  if (config.sigmas.empty()) throw ConfigError("rate_study: sigma list is empty");
  if (config.horizons.size() < 2) throw ConfigError("rate_study: need at least two T values to fit a rate");
  const auto start = std::chrono::steady_clock::now();
  std::vector<CellKey> keys;
  for (auto horizon : config.horizons) keys.push_back({config.sigmas.front(), config.a, config.b, horizon});
  AggregateResult result{"rate", run_cells(problem, config, keys), std::nullopt, {}, false, 0.0};
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& cell : result.cells) {
    if (cell.completed == 0) continue;
    x.push_back(static_cast<double>(cell.key.horizon));
    y.push_back(cell.mean_selected_grad_sq);
  }
  if (x.size() < 2) throw ConfigError("rate_study: fewer than two T values completed");
  result.fit = fit_log_log(x, y);
  finish(result, config, start);
  return result;
}

AggregateResult stepsize_grid(const Problem& problem, const ExperimentConfig& config) {
  if (config.sigmas.empty() || config.horizons.empty()) throw ConfigError("stepsize_grid: empty sigma or T list");
  std::vector<CellKey> keys;
  for (double a : config.a_grid) {
    for (double b : config.b_grid) {
      if (b <= a) keys.push_back({config.sigmas.front(), a, b, config.horizons.front()});
    }
  }
  if (keys.empty()) throw ConfigError("stepsize_grid: grid has no (a, b) pair with b <= a");
  const auto start = std::chrono::steady_clock::now();
  AggregateResult result{"grid", run_cells(problem, config, keys), std::nullopt, {}, false, 0.0};
  result.ranking.resize(result.cells.size());
  std::iota(result.ranking.begin(), result.ranking.end(), 0);
  std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t l, std::size_t r) {
    return result.cells[l].mean_selected_grad_sq < result.cells[r].mean_selected_grad_sq;
  });
  finish(result, config, start);
  return result;
}

std::vector<NamedProfile> mixing_report(const std::vector<Problem>& problems, std::size_t horizon) {
  std::vector<NamedProfile> out;
  for (const auto& problem : problems) {
    NamedProfile entry{problem.name, std::nullopt, {}};
    try {
      entry.profile = mixing_profile(problem.mdp, problem.behavior, horizon);
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void write_aggregate_csv(const AggregateResult& result, const std::string& digest,
                         const std::filesystem::path& path) {
  std::string out =
      "sigma,a,b,T,t,mean_grad_sq,stderr_grad_sq,mean_tracking_sq,stderr_tracking_sq,config_digest,seed_first,"
      "seed_last\n";
  for (const auto& cell : result.cells) {
    const std::string prefix = format_double(cell.key.sigma) + "," + format_double(cell.key.a) + "," +
                               format_double(cell.key.b) + "," + std::to_string(cell.key.horizon) + ",";
    const std::string suffix =
        "," + digest + "," + std::to_string(cell.seed_first) + "," + std::to_string(cell.seed_last) + "\n";
    const auto& c = cell.curves;
    for (std::size_t k = 0; k < c.t.size(); ++k) {
      out += prefix + std::to_string(c.t[k]) + "," + format_double(c.mean_grad_sq[k]) + "," +
             format_double(c.stderr_grad_sq[k]) + "," + format_double(c.mean_tracking_sq[k]) + "," +
             format_double(c.stderr_tracking_sq[k]) + suffix;
    }
  }
  write_text_file(path, out);
}

void write_summary_csv(const AggregateResult& result, const std::string& digest,
                       const std::filesystem::path& path) {
  std::string out =
      "sigma,a,b,T,completed,final_mean_grad_sq,final_stderr_grad_sq,mean_grad_sq_M,stderr_grad_sq_M,rank,"
      "config_digest,seed_first,seed_last\n";
  std::vector<std::size_t> rank(result.cells.size(), 0);
  for (std::size_t r = 0; r < result.ranking.size(); ++r) rank[result.ranking[r]] = r + 1;
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& cell = result.cells[i];
    out += format_double(cell.key.sigma) + "," + format_double(cell.key.a) + "," + format_double(cell.key.b) +
           "," + std::to_string(cell.key.horizon) + "," + std::to_string(cell.completed) + "," +
           format_double(cell.final_mean_grad_sq()) + "," + format_double(cell.final_stderr_grad_sq()) + "," +
           format_double(cell.mean_selected_grad_sq) + "," + format_double(cell.stderr_selected_grad_sq) + "," +
           (result.ranking.empty() ? std::string() : std::to_string(rank[i])) + "," + digest + "," +
           std::to_string(cell.seed_first) + "," + std::to_string(cell.seed_last) + "\n";
  }
  write_text_file(path, out);
}

void write_manifest(const AggregateResult& result, const ExperimentConfig& config,
                    const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["kind"] = result.kind;
  doc["version"] = kVersion;
  doc["config_digest"] = config.config_digest;
  doc["config"] = config.config_echo;
  doc["seeds"] = {{"first", config.base_seed}, {"last", config.base_seed + config.n_seeds - 1},
                  {"count", config.n_seeds}};
  doc["wall_clock_seconds"] = result.wall_seconds;
  doc["partial"] = result.partial;
  auto cells = nlohmann::json::array();
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& cell = result.cells[i];
    cells.push_back({{"label", cell.key.label()},
                     {"sigma", cell.key.sigma},
                     {"a", cell.key.a},
                     {"b", cell.key.b},
                     {"T", cell.key.horizon},
                     {"completed", cell.completed},
                     {"final_mean_grad_sq", cell.final_mean_grad_sq()},
                     {"mean_grad_sq_M", cell.mean_selected_grad_sq},
                     {"stderr_grad_sq_M", cell.stderr_selected_grad_sq},
                     {"errors", cell.errors}});
  }
  doc["cells"] = cells;
  if (result.fit) {
    doc["rate_fit"] = {{"slope", result.fit->slope},
                       {"intercept", result.fit->intercept},
                       {"residual", result.fit->residual},
                       {"points", result.fit->points},
                       {"degenerate", result.fit->degenerate}};
  }
  if (!result.ranking.empty()) {
    auto ranking = nlohmann::json::array();
    for (auto i : result.ranking) ranking.push_back(result.cells[i].key.label());
    doc["ranking"] = ranking;
  }
  write_text_file(path, doc.dump(2) + "\n");
}

void write_mixing_csv(const std::vector<NamedProfile>& profiles, const std::filesystem::path& path) {
  std::string out = "mdp,t,tv,fitted_m,fitted_rho,fit_residual,degenerate,error\n";
  for (const auto& entry : profiles) {
    if (!entry.profile) {
      out += entry.name + ",,,,,,," + entry.error + "\n";
      continue;
    }
    const auto& p = *entry.profile;
    const std::string tail = "," + format_double(p.fitted_m) + "," + format_double(p.fitted_rho) + "," +
                             format_double(p.fit_residual) + "," + (p.degenerate ? "1" : "0") + ",\n";
    for (std::size_t t = 0; t < p.tv.size(); ++t) {
      out += entry.name + "," + std::to_string(t) + "," + format_double(p.tv[t]) + tail;
    }
  }
  write_text_file(path, out);
}

}  // namespace ggq
