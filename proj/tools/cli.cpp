#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ggq/audits.hpp"
#include "ggq/config.hpp"
#include "ggq/errors.hpp"
#include "ggq/experiments.hpp"
#include "ggq/greedy_gq.hpp"

namespace ggq::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::size_t> stride;
  bool force = false;
  std::optional<double> claimed_k1;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

ConfigDocument load(const Options& opts) {
  ConfigDocument doc = load_config(opts.config);
  if (opts.seed) {
    doc.seed = *opts.seed;
    doc.run_seed = *opts.seed;
  }
  if (opts.stride) doc.stride = *opts.stride;
  return doc;
}

fs::path output_dir(const Options& opts, const ConfigDocument& doc, const std::string& command) {
  if (opts.out) return *opts.out;
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') return env;
  if (!doc.output_dir.empty()) return doc.output_dir;
  return fs::path("out") / command;
}

void claim_output(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force) {
    throw ConfigError("output directory " + dir.string() + " is not empty (pass --force to overwrite)");
  }
  fs::create_directories(dir);
}

std::string fmt(double x, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

int cmd_run(const Options& opts, Context& ctx) {
  const ConfigDocument doc = load(opts);
  const Problem problem = build_problem(doc);
  const LearnerInit init = learner_init(doc, problem.features.n_features());
  RunOptions options{learner_schedule(doc), Projection{doc.projection_radius}, doc.stride, doc.run_seed, doc.digest,
                     doc.divergence_threshold};
  const fs::path dir = output_dir(opts, doc, "run");
  claim_output(dir, opts.force);

  const RunRecord record =
      run(problem.mdp, problem.behavior, problem.features, SoftmaxPolicy(doc.sigma), init, options, problem.oracle.get());
  write_run_csv(record, dir / "run.csv");
  write_run_sidecar(record, dir / "run.json");
  ctx.out << "run  sigma=" << fmt(doc.sigma) << " T=" << record.horizon << " seed=" << record.seed
          << " M=" << record.selected_iterate << " |grad J(theta_M)|^2=" << fmt(record.selected_grad_norm_sq)
          << " |grad J(theta_T)|^2=" << fmt(record.grad_norm_sq.back()) << "\n";
  ctx.out << "wrote " << (dir / "run.csv").string() << " (" << record.t.size() << " rows)\n";
  return kOk;
}

std::vector<Problem> problems_for(const ConfigDocument& doc) {
  if (doc.generated_mdps == 0) return {build_problem(doc)};
  std::vector<Problem> out;
  for (auto& p : build_problem_set(doc)) {
    out.push_back(Problem::make(p.name, std::move(p.mdp), std::move(p.behavior), std::move(p.features)));
  }
  return out;
}

void print_cells(const AggregateResult& result, Context& ctx) {
  ctx.out << std::left << std::setw(8) << "sigma" << std::setw(8) << "a" << std::setw(8) << "b" << std::setw(9) << "T"
          << std::setw(8) << "runs" << std::setw(18) << "final |gradJ|^2"
          << std::setw(18) << "|gradJ(th_M)|^2" << "stderr\n";
  for (const auto& cell : result.cells) {
    ctx.out << std::setw(8) << fmt(cell.key.sigma, 4) << std::setw(8) << fmt(cell.key.a, 4) << std::setw(8)
            << fmt(cell.key.b, 4) << std::setw(9) << cell.key.horizon << std::setw(8)
            << (std::to_string(cell.completed) + "/" + std::to_string(cell.completed + cell.errors.size()))
            << std::setw(18) << fmt(cell.final_mean_grad_sq()) << std::setw(18) << fmt(cell.mean_selected_grad_sq)
            << fmt(cell.stderr_selected_grad_sq) << "\n";
    for (const auto& e : cell.errors) ctx.err << "  " << cell.key.label() << ": " << e << "\n";
  }
  ctx.out << std::right;
}

int cmd_experiment(const std::string& kind, const Options& opts, Context& ctx) {
  const ConfigDocument doc = load(opts);
  if (doc.experiment_kind != kind) {
    throw ConfigError("experiment.kind is '" + doc.experiment_kind + "', expected '" + kind + "'");
  }
  const auto problems = problems_for(doc);
  const fs::path dir = output_dir(opts, doc, kind);
  claim_output(dir, opts.force);

  bool partial = false;
  for (const auto& problem : problems) {
    ExperimentConfig config = experiment_config(doc, problem.features.n_features());
    if (opts.jobs) config.jobs = *opts.jobs;
    config.output_dir = problems.size() == 1 ? dir : dir / problem.name;
    AggregateResult result;
    if (kind == "sweep") {
      result = fig1_sweep(problem, config);
    } else if (kind == "rate") {
      result = rate_study(problem, config);
    } else {
      result = stepsize_grid(problem, config);
    }
    ctx.out << kind << " " << problem.name << "  lambda_min(C)=" << fmt(problem.oracle->model().lambda_min)
            << "  " << fmt(result.wall_seconds, 3) << " s\n";
    print_cells(result, ctx);
    if (result.fit) {
      ctx.out << "log-log slope " << fmt(result.fit->slope) << " over " << result.fit->points << " points"
              << (result.fit->degenerate ? " (degenerate)" : "") << "\n";
    }
    if (!result.ranking.empty()) {
      const auto& best = result.cells[result.ranking.front()];
      ctx.out << "best (a, b) = (" << fmt(best.key.a) << ", " << fmt(best.key.b) << ")\n";
    }
    partial = partial || result.partial;
  }
  ctx.out << "wrote " << dir.string() << "\n";
  if (partial) {
    ctx.err << "some runs failed; see the manifest error table\n";
    return kDivergence;
  }
  return kOk;
}

void print_audit(const AuditResult& r, Context& ctx) {
  ctx.out << std::left << std::setw(5) << (r.pass ? "PASS" : "FAIL") << std::setw(62) << r.name << std::right
          << std::setw(14) << fmt(r.measured, 4) << " <= " << std::left << std::setw(12) << fmt(r.tolerance, 4)
          << r.detail << std::right << "\n";
}

int cmd_validate(const Options& opts, Context& ctx) {
  const ConfigDocument doc = load(opts);
  std::vector<Problem> problems;
  try {
    problems = problems_for(doc);
  } catch (const AssumptionError& e) {
    print_audit({"assumption_" + std::to_string(e.assumption()), 1.0, 0.0, false, e.what()}, ctx);
    return kPropertyFailure;
  }

  AuditOptions options;
  options.seed = doc.seed;
  options.radius = doc.radius;
  options.mixing_horizon = doc.mixing_horizon;
  const SoftmaxPolicy policy(doc.sigma);
  if (opts.claimed_k1) {
    PolicyConstants claimed = policy_constants(policy);
    claimed.k1 = *opts.claimed_k1;
    options.claimed_constants = claimed;
  }

  bool all = true;
  for (const auto& problem : problems) {
    ctx.out << problem.name << "  sigma=" << fmt(doc.sigma) << "  lambda_min(C)="
            << fmt(problem.oracle->model().lambda_min) << "\n";
    for (const auto& r : run_audits(problem, policy, options)) {
      print_audit(r, ctx);
      all = all && r.pass;
    }
  }
  ctx.out << (all ? "all properties hold\n" : "property failures\n");
  return all ? kOk : kPropertyFailure;
}

int cmd_mixing(const Options& opts, Context& ctx) {
  const ConfigDocument doc = load(opts);
  const auto components = build_problem_set(doc);
  const fs::path dir = output_dir(opts, doc, "mixing");
  claim_output(dir, opts.force);

  const auto report = mixing_report(components, doc.mixing_horizon);
  write_mixing_csv(report, dir / "mixing.csv");
  bool ok = true;
  for (const auto& entry : report) {
    if (!entry.profile) {
      ctx.out << entry.name << "  " << entry.error << "\n";
      ok = false;
      continue;
    }
    const auto& p = *entry.profile;
    ctx.out << entry.name << "  m=" << fmt(p.fitted_m) << " rho=" << fmt(p.fitted_rho)
            << " residual=" << fmt(p.fit_residual) << " points=" << p.fit_points
            << (p.degenerate ? " (degenerate)" : "") << "\n";
  }
  ctx.out << "wrote " << (dir / "mixing.csv").string() << "\n";
  return ok ? kOk : kPropertyFailure;
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Greedy-GQ lab: runs, sweeps and exact-oracle audits"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config, "config document (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "override the run/base seed");
    sub->add_option("--jobs", opts.jobs, "worker threads (default: all cores)");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--stride", opts.stride, "diagnostic stride (0 = auto)");
    sub->add_flag("--force", opts.force, "write into a non-empty output directory");
  };
  auto* run_cmd = app.add_subcommand("run", "single Greedy-GQ run");
  auto* sweep_cmd = app.add_subcommand("sweep", "sigma sweep");
  auto* rate_cmd = app.add_subcommand("rate", "convergence rate over T");
  auto* grid_cmd = app.add_subcommand("grid", "stepsize exponent grid");
  auto* validate_cmd = app.add_subcommand("validate", "exact-oracle property table");
  auto* mixing_cmd = app.add_subcommand("mixing", "mixing profile of the behavior chain");
  for (auto* sub : {run_cmd, sweep_cmd, rate_cmd, grid_cmd, validate_cmd, mixing_cmd}) add_common(sub);
  // Test hook: audit against a wrong k1, as if sigma were mislabeled.
  validate_cmd->add_option("--inject-k1", opts.claimed_k1)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  Context ctx{out, err};
  try {
    if (run_cmd->parsed()) return cmd_run(opts, ctx);
    if (sweep_cmd->parsed()) return cmd_experiment("sweep", opts, ctx);
    if (rate_cmd->parsed()) return cmd_experiment("rate", opts, ctx);
    if (grid_cmd->parsed()) return cmd_experiment("grid", opts, ctx);
    if (validate_cmd->parsed()) return cmd_validate(opts, ctx);
    return cmd_mixing(opts, ctx);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const AssumptionError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

int main(int argc, char** argv) { return main(argc, argv, std::cout, std::cerr); }

}  // namespace ggq::cli
