#include "ggq/greedy_gq.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ggq/csv.hpp"
#include "ggq/errors.hpp"

namespace ggq {

StepSchedule StepSchedule::exponents(std::size_t horizon, double a, double b, bool enforce_ranges) {
  if (enforce_ranges) {
    if (!(a > 0.5 && a <= 1.0)) throw ConfigError("stepsize exponent a must lie in (1/2, 1]");
    if (!(b > 0.0 && b <= a)) throw ConfigError("stepsize exponent b must lie in (0, a]");
  } else if (!(a >= 0.0) || !(b >= 0.0)) {
    throw ConfigError("stepsize exponents must be nonnegative");
  }
  const double base = static_cast<double>(std::max<std::size_t>(horizon, 1));
  StepSchedule schedule = constant(horizon, std::pow(base, -a), std::pow(base, -b));
  schedule.a_ = a;
  schedule.b_ = b;
  return schedule;
}

StepSchedule StepSchedule::constant(std::size_t horizon, double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw ConfigError("stepsizes must be finite and nonnegative");
  }
  StepSchedule schedule;
  schedule.horizon_ = horizon;
  schedule.alpha_ = {alpha};
  schedule.beta_ = {beta};
  return schedule;
}

StepSchedule StepSchedule::sequences(std::size_t horizon, std::vector<double> alpha,
                                     std::vector<double> beta) {
  if (alpha.size() < horizon || alpha.size() > horizon + 1 || alpha.empty()) {
    throw ConfigError("explicit alpha sequence needs T or T+1 entries");
  }
  if (beta.size() < std::max<std::size_t>(horizon, 1)) {
    throw ConfigError("explicit beta sequence needs at least T entries");
  }
  for (double x : alpha) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("alpha entries must be finite and nonnegative");
  }
  for (double x : beta) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("beta entries must be finite and nonnegative");
  }
  StepSchedule schedule;
  schedule.horizon_ = horizon;
  schedule.alpha_ = std::move(alpha);
  schedule.beta_ = std::move(beta);
  return schedule;
}

double StepSchedule::alpha(std::size_t t) const {
  return alpha_[std::min(t, alpha_.size() - 1)];
}

double StepSchedule::beta(std::size_t t) const {
  return beta_[std::min(t, beta_.size() - 1)];
}

double StepSchedule::iterate_weight(std::size_t k) const { return alpha(k); }

Eigen::VectorXd update_direction(const SoftmaxPolicy& policy, const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& omega, const FeatureMap& features, double gamma,
                                 const Transition& o) {
  if (omega.size() != theta.size()) throw ConfigError("omega and theta dimensions differ");
  const NextStateTerms next = next_state_terms(policy, theta, features, o.s_next);
  const auto phi = features.phi(o.s, o.a);
  const double delta = o.r + gamma * next.v_bar - phi.dot(theta);
  return delta * phi - (gamma * omega.dot(phi)) * next.phi_hat;
}

namespace {

void project(Eigen::VectorXd& x, double radius) {
  const double norm = x.norm();
  if (norm > radius) x *= radius / norm;
}

}  // namespace

LearnerState gq_step(const LearnerState& state, const Transition& o, const StepSchedule& schedule,
                     const SoftmaxPolicy& policy, const FeatureMap& features, double gamma,
                     const Projection& projection) {
  if (state.t >= schedule.horizon()) throw ConfigError("gq_step: step index past the horizon");
  if (static_cast<std::size_t>(state.theta.size()) != features.n_features() ||
      state.omega.size() != state.theta.size()) {
    throw ConfigError("gq_step: parameter dimension does not match features");
  }
  if (o.s != state.s) throw ConfigError("gq_step: transition does not start at the current state");

  const NextStateTerms next = next_state_terms(policy, state.theta, features, o.s_next);
  const auto phi = features.phi(o.s, o.a);
  const double delta = o.r + gamma * next.v_bar - phi.dot(state.theta);
  const double omega_phi = state.omega.dot(phi);

  LearnerState out;
  out.theta = state.theta + schedule.alpha(state.t) * (delta * phi - (gamma * omega_phi) * next.phi_hat);
  out.omega = state.omega + (schedule.beta(state.t) * (delta - omega_phi)) * phi;
  out.t = state.t + 1;
  out.s = o.s_next;
  if (projection.radius) {
    project(out.theta, *projection.radius);
    project(out.omega, *projection.radius);
  }
  return out;
}

std::size_t auto_stride(std::size_t horizon) noexcept {
  constexpr std::size_t kMaxRows = 10'000;
  if (horizon <= kMaxRows) return 1;
  return (horizon + kMaxRows - 1) / kMaxRows;
}

std::size_t sample_iterate_index(const StepSchedule& schedule, CounterRng& rng) {
  const std::size_t horizon = schedule.horizon();
  double total = 0.0;
  for (std::size_t k = 0; k <= horizon; ++k) total += schedule.iterate_weight(k);
  if (!(total > 0.0)) return 0;
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k <= horizon; ++k) {
    const double w = schedule.iterate_weight(k);
    if (w <= 0.0) continue;
    last_positive = k;
    cumulative += w;
    if (u < cumulative) return k;
  }
  return last_positive;
}

RunRecord run(const TabularMdp& mdp, const BehaviorPolicy& behavior, const FeatureMap& features,
              const SoftmaxPolicy& target, const LearnerInit& init, const RunOptions& options,
              const Oracle* oracle) {
  const auto n = static_cast<Eigen::Index>(features.n_features());
  if (init.theta0.size() != n || init.omega0.size() != n) {
    throw ConfigError("initial theta/omega dimension does not match features");
  }
  if (init.s0 >= mdp.n_states) throw ConfigError("initial state out of range");

  const std::size_t horizon = options.schedule.horizon();
  const std::size_t stride = options.stride == 0 ? auto_stride(horizon) : options.stride;

  RunRecord record;
  record.horizon = horizon;
  record.stride = stride;
  record.seed = options.seed;
  record.config_digest = options.config_digest;
  {
    std::ostringstream label;
    label << "softmax(sigma=" << format_double(target.sigma) << ")";
    record.policy_label = label.str();
  }

  CounterRng iterate_rng(options.seed, kIterateStream);
  record.selected_iterate = sample_iterate_index(options.schedule, iterate_rng);

  CounterRng rng(options.seed, kTrajectoryStream);
  LearnerState state{init.theta0, init.omega0, 0, init.s0};

  const std::size_t rows = horizon / stride + 2;
  record.t.reserve(rows);
  record.theta_snapshots.reserve(rows);
  record.omega_snapshots.reserve(rows);

  auto log_row = [&](const LearnerState& s) {
    record.t.push_back(s.t);
    record.theta_snapshots.push_back(s.theta);
    record.omega_snapshots.push_back(s.omega);
    if (oracle) {
      const OracleEval eval = oracle->evaluate(target, s.theta);
      record.j.push_back(eval.j);
      record.grad_norm_sq.push_back(eval.grad_j.squaredNorm());
      record.tracking_sq.push_back((s.omega - eval.omega_star).squaredNorm());
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      record.j.push_back(nan);
      record.grad_norm_sq.push_back(nan);
      record.tracking_sq.push_back(nan);
    }
  };

  for (;;) {
    if (state.t == record.selected_iterate) record.theta_selected = state.theta;
    if (state.t % stride == 0 || state.t == horizon) log_row(state);
    if (state.t == horizon) break;

    const Transition o = sample_transition(mdp, behavior, state.s, rng);
    state = gq_step(state, o, options.schedule, target, features, mdp.gamma, options.projection);

    if (!state.theta.allFinite() || !state.omega.allFinite()) {
      throw DivergenceError(state.t, "non-finite parameter");
    }
    if (state.theta.norm() > options.divergence_threshold) {
      throw DivergenceError(state.t, "||theta|| = " + format_double(state.theta.norm()) +
                                         " exceeds " + format_double(options.divergence_threshold));
    }
  }

  record.theta_final = state.theta;
  record.omega_final = state.omega;
  record.selected_grad_norm_sq = oracle
                                     ? oracle->evaluate(target, record.theta_selected).grad_j.squaredNorm()
                                     : std::numeric_limits<double>::quiet_NaN();
  return record;
}

RandomIterate select_random_iterate(const RunRecord& record, const StepSchedule& schedule,
                                    CounterRng& rng) {
  if (record.t.empty()) throw ConfigError("select_random_iterate: empty record");
  std::vector<double> weights(record.t.size());
  double total = 0.0;
  for (std::size_t k = 0; k < record.t.size(); ++k) {
    weights[k] = schedule.iterate_weight(record.t[k]);
    total += weights[k];
  }
  if (!(total > 0.0)) return {record.t.front(), record.theta_snapshots.front()};
  for (double& w : weights) w /= total;
  const std::size_t row = rng.categorical(weights);
  return {record.t[row], record.theta_snapshots[row]};
}

double tracking_error(const LearnerState& state, const Oracle& oracle, const SoftmaxPolicy& policy) {
  return oracle.tracking_error(policy, state.theta, state.omega);
}

void write_run_csv(const RunRecord& record, const std::filesystem::path& path) {
  std::string out = "t,j,grad_norm_sq,tracking_sq\n";
  for (std::size_t k = 0; k < record.t.size(); ++k) {
    out += std::to_string(record.t[k]);
    out += ',';
    out += format_double(record.j[k]);
    out += ',';
    out += format_double(record.grad_norm_sq[k]);
    out += ',';
    out += format_double(record.tracking_sq[k]);
    out += '\n';
  }
  write_text_file(path, out);
}

namespace {

nlohmann::json to_json_vector(const Eigen::VectorXd& x) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) arr.push_back(x(i));
  return arr;
}

}  // namespace

void write_run_sidecar(const RunRecord& record, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["config_digest"] = record.config_digest;
  doc["seed"] = record.seed;
  doc["policy"] = record.policy_label;
  doc["horizon"] = record.horizon;
  doc["stride"] = record.stride;
  doc["M"] = record.selected_iterate;
  doc["theta_M"] = to_json_vector(record.theta_selected);
  if (std::isfinite(record.selected_grad_norm_sq)) {
    doc["grad_norm_sq_M"] = record.selected_grad_norm_sq;
  } else {
    doc["grad_norm_sq_M"] = nullptr;
  }
  doc["theta_final"] = to_json_vector(record.theta_final);
  doc["omega_final"] = to_json_vector(record.omega_final);
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace ggq
