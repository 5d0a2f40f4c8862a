#include "ggq/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "ggq/csv.hpp"
#include "ggq/errors.hpp"

namespace ggq {

namespace {

using nlohmann::json;

/// Read access to one JSON object that remembers which keys were consumed.
class Section {
 public:
  Section(const json& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.is_object()) throw ConfigError("section '" + name_ + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : node_.items()) {
      if (!allowed.count(item.key())) {
        throw ConfigError("unknown key '" + item.key() + "' in section '" + name_ + "'");
      }
    }
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }
  const json& at(const char* key) const {
    if (!node_.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in section '" + name_ + "'");
    return node_.at(key);
  }

  template <class T>
  T get(const char* key) const {
    try {
      return at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("key '" + std::string(key) + "' in section '" + name_ + "': " + e.what());
    }
  }

  template <class T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  std::string path(const char* key) const { return name_ + "." + key; }

 private:
  const json& node_;
  std::string name_;
};

const json& section_node(const json& doc, const char* name) {
  static const json empty = json::object();
  return doc.contains(name) ? doc.at(name) : empty;
}

std::vector<double> flatten(const json& node, std::size_t depth, const std::vector<std::size_t>& dims,
                            const std::string& what) {
  std::vector<double> out;
  std::function<void(const json&, std::size_t)> walk = [&](const json& n, std::size_t level) {
    if (level == depth) {
      if (!n.is_number()) throw ConfigError(what + ": expected a number");
      out.push_back(n.get<double>());
      return;
    }
    if (!n.is_array()) throw ConfigError(what + ": expected a nested array of depth " + std::to_string(depth));
    if (level < dims.size() && n.size() != dims[level]) {
      throw ConfigError(what + ": dimension " + std::to_string(level) + " has " + std::to_string(n.size()) +
                        " entries, expected " + std::to_string(dims[level]));
    }
    for (const auto& child : n) walk(child, level + 1);
  };
  walk(node, 0);
  return out;
}

std::size_t array_depth(const json& node) {
  std::size_t depth = 0;
  const json* cur = &node;
  while (cur->is_array() && !cur->empty()) {
    ++depth;
    cur = &cur->front();
  }
  return depth;
}

}  // namespace

std::string config_digest(const nlohmann::json& doc) { return fnv1a_hex(doc.dump()); }

ConfigDocument parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  {
    std::set<std::string> allowed{"mdp", "behavior_policy", "features", "target_policy", "learner", "experiment",
                                  "output", "description"};
    for (const auto& item : doc.items()) {
      if (!allowed.count(item.key())) throw ConfigError("unknown top-level key '" + item.key() + "'");
    }
  }
  ConfigDocument config;
  config.raw = doc;
  config.digest = config_digest(doc);

  // Structural checks of component sections happen in build_components; only
  // key sets are enforced here.
  Section(section_node(doc, "mdp"), "mdp")
      .allow({"kind", "n_states", "n_actions", "gamma", "r_max", "seed", "kernel", "reward"});
  Section(section_node(doc, "behavior_policy"), "behavior_policy").allow({"kind", "seed", "min_prob", "probs"});
  Section(section_node(doc, "features"), "features")
      .allow({"kind", "n_features", "seed", "table", "normalize"});

  Section target(section_node(doc, "target_policy"), "target_policy");
  target.allow({"sigma"});
  config.sigma = target.get_or("sigma", 1.0);
  if (!(config.sigma > 0.0)) throw ConfigError("target_policy.sigma must be positive");

  Section learner(section_node(doc, "learner"), "learner");
  learner.allow({"theta0", "omega0", "s0", "schedule", "projection_radius", "divergence_threshold", "seed"});
  config.theta0 = learner.get_or("theta0", std::vector<double>{});
  config.omega0 = learner.get_or("omega0", std::vector<double>{});
  config.s0 = learner.get_or<std::size_t>("s0", 0);
  config.run_seed = learner.get_or<std::uint64_t>("seed", 0);
  if (learner.has("projection_radius")) {
    config.projection_radius = learner.get<double>("projection_radius");
    if (!(*config.projection_radius > 0.0)) throw ConfigError("learner.projection_radius must be positive");
  }
  config.divergence_threshold = learner.get_or("divergence_threshold", 1e6);
  if (learner.has("schedule")) {
    Section schedule(learner.at("schedule"), "learner.schedule");
    schedule.allow({"T", "a", "b", "alpha", "beta"});
    config.horizon = schedule.get_or<std::size_t>("T", 1000);
    if (schedule.has("a")) config.schedule_a = schedule.get<double>("a");
    if (schedule.has("b")) config.schedule_b = schedule.get<double>("b");
    auto scalar_or_array = [&](const char* key) {
      const json& n = schedule.at(key);
      if (n.is_number()) return std::vector<double>{n.get<double>()};
      return schedule.get<std::vector<double>>(key);
    };
    if (schedule.has("alpha")) config.alpha = scalar_or_array("alpha");
    if (schedule.has("beta")) config.beta = scalar_or_array("beta");
    const bool exponents = config.schedule_a || config.schedule_b;
    const bool explicit_steps = !config.alpha.empty() || !config.beta.empty();
    if (exponents && explicit_steps) throw ConfigError("learner.schedule: give either a/b or alpha/beta, not both");
    if (exponents && !(config.schedule_a && config.schedule_b)) throw ConfigError("learner.schedule: need both a and b");
    if (explicit_steps && (config.alpha.empty() || config.beta.empty())) {
      throw ConfigError("learner.schedule: need both alpha and beta");
    }
  }
  if (!config.schedule_a && config.alpha.empty()) {
    config.schedule_a = 2.0 / 3.0;
    config.schedule_b = 1.0 / 3.0;
  }

  Section experiment(section_node(doc, "experiment"), "experiment");
  experiment.allow({"kind", "sigmas", "T_grid", "a", "b", "a_grid", "b_grid", "n_seeds", "seed", "stride",
                    "allow_out_of_range", "radius", "mixing_horizon", "generated_mdps"});
  config.experiment_kind = experiment.get_or<std::string>("kind", "run");
  static const std::set<std::string> kinds{"run", "sweep", "rate", "grid", "validate", "mixing"};
  if (!kinds.count(config.experiment_kind)) {
    throw ConfigError("experiment.kind '" + config.experiment_kind + "' is not one of run|sweep|rate|grid|validate|mixing");
  }
  config.sigmas = experiment.get_or("sigmas", std::vector<double>{config.sigma});
  for (double s : config.sigmas) {
    if (!(s > 0.0)) throw ConfigError("experiment.sigmas entries must be positive");
  }
  config.horizons = experiment.get_or("T_grid", std::vector<std::size_t>{config.horizon});
  config.a = experiment.get_or("a", config.schedule_a.value_or(2.0 / 3.0));
  config.b = experiment.get_or("b", config.schedule_b.value_or(1.0 / 3.0));
  config.a_grid = experiment.get_or("a_grid", std::vector<double>{});
  config.b_grid = experiment.get_or("b_grid", std::vector<double>{});
  config.n_seeds = experiment.get_or<std::size_t>("n_seeds", 20);
  if (config.n_seeds == 0) throw ConfigError("experiment.n_seeds must be at least 1");
  config.seed = experiment.get_or<std::uint64_t>("seed", config.run_seed);
  config.stride = experiment.get_or<std::size_t>("stride", 0);
  config.allow_out_of_range = experiment.get_or("allow_out_of_range", false);
  config.radius = experiment.get_or("radius", 10.0);
  if (!(config.radius > 0.0)) throw ConfigError("experiment.radius must be positive");
  config.mixing_horizon = experiment.get_or<std::size_t>("mixing_horizon", 50);
  config.generated_mdps = experiment.get_or<std::size_t>("generated_mdps", 0);

  Section output(section_node(doc, "output"), "output");
  output.allow({"directory"});
  config.output_dir = output.get_or<std::string>("directory", "");
  return config;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

Components build_components(const ConfigDocument& config) {
  const json& doc = config.raw;
  Section mdp_section(section_node(doc, "mdp"), "mdp");
  const auto kind = mdp_section.get_or<std::string>("kind", "uniform");
  const auto n_states = mdp_section.get_or<std::size_t>("n_states", 4);
  const auto n_actions = mdp_section.get_or<std::size_t>("n_actions", 2);
  const double gamma = mdp_section.get_or("gamma", 0.9);
  const double r_max = mdp_section.get_or("r_max", 1.0);
  const auto mdp_seed = mdp_section.get_or<std::uint64_t>("seed", 0);
  if (n_states == 0 || n_actions == 0) throw ConfigError("mdp: n_states and n_actions must be positive");

  auto parse_reward = [&]() -> std::vector<double> {
    const json& node = mdp_section.at("reward");
    const auto depth = array_depth(node);
    if (depth == 2) return broadcast_reward(n_states, n_actions, flatten(node, 2, {n_states, n_actions}, "mdp.reward"));
    if (depth == 3) return flatten(node, 3, {n_states, n_actions, n_states}, "mdp.reward");
    throw ConfigError("mdp.reward must be r[s][a] or r[s][a][s']");
  };

  Components c;
  if (kind == "uniform") {
    c.mdp = uniform_kernel_mdp(n_states, n_actions, gamma,
                               random_rewards(mdp_seed, n_states, n_actions, r_max), r_max);
    if (mdp_section.has("reward")) c.mdp.reward = parse_reward();
  } else if (kind == "random") {
    c.mdp = random_mdp(mdp_seed, n_states, n_actions, gamma, r_max);
    if (mdp_section.has("reward")) c.mdp.reward = parse_reward();
  } else if (kind == "explicit") {
    c.mdp.n_states = n_states;
    c.mdp.n_actions = n_actions;
    c.mdp.gamma = gamma;
    c.mdp.r_max = r_max;
    c.mdp.kernel = flatten(mdp_section.at("kernel"), 3, {n_states, n_actions, n_states}, "mdp.kernel");
    c.mdp.reward = parse_reward();
  } else {
    throw ConfigError("mdp.kind '" + kind + "' is not one of uniform|random|explicit");
  }
  if (const auto report = validate_mdp(c.mdp); !report.ok()) throw ConfigError("mdp: " + report.summary());

  Section policy_section(section_node(doc, "behavior_policy"), "behavior_policy");
  const auto policy_kind = policy_section.get_or<std::string>("kind", "uniform");
  if (policy_kind == "uniform") {
    c.behavior = uniform_policy(n_states, n_actions);
  } else if (policy_kind == "random") {
    c.behavior = random_policy(policy_section.get_or<std::uint64_t>("seed", 0), n_states, n_actions,
                               policy_section.get_or("min_prob", 0.05));
  } else if (policy_kind == "explicit") {
    c.behavior = BehaviorPolicy{n_states, n_actions,
                                flatten(policy_section.at("probs"), 2, {n_states, n_actions}, "behavior_policy.probs")};
  } else {
    throw ConfigError("behavior_policy.kind '" + policy_kind + "' is not one of uniform|random|explicit");
  }
  if (const auto report = validate_policy(c.mdp, c.behavior); !report.ok()) {
    throw ConfigError("behavior_policy: " + report.summary());
  }

  Section feature_section(section_node(doc, "features"), "features");
  const auto feature_kind = feature_section.get_or<std::string>("kind", "random");
  if (feature_kind == "random") {
    c.features = FeatureMap::random(feature_section.get_or<std::uint64_t>("seed", 0), n_states, n_actions,
                                    feature_section.get_or<std::size_t>("n_features", 2));
  } else if (feature_kind == "explicit") {
    const json& table = feature_section.at("table");
    if (array_depth(table) != 3 || table.empty() || table.front().empty()) {
      throw ConfigError("features.table must be phi[s][a][i]");
    }
    const std::size_t n_features = table.front().front().size();
    const auto flat = flatten(table, 3, {n_states, n_actions, n_features}, "features.table");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n_states * n_actions), static_cast<Eigen::Index>(n_features));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = flat[static_cast<std::size_t>(i * m.cols() + j)];
    }
    c.features = FeatureMap::from_table(n_states, n_actions, std::move(m), feature_section.get_or("normalize", false));
  } else {
    throw ConfigError("features.kind '" + feature_kind + "' is not one of random|explicit");
  }
  return c;
}

Problem build_problem(const ConfigDocument& config) {
  Components c = build_components(config);
  return Problem::make("mdp-0", std::move(c.mdp), std::move(c.behavior), std::move(c.features));
}

std::vector<Problem> build_problem_set(const ConfigDocument& config) {
  std::vector<Problem> out;
  Components base = build_components(config);
  // Keyed on the mdp seed, not the run seed.
  std::uint64_t mdp_seed = 0;
  if (config.raw.contains("mdp") && config.raw["mdp"].contains("seed")) {
    mdp_seed = config.raw["mdp"]["seed"].get<std::uint64_t>();
  }
  for (std::size_t k = 1; k <= config.generated_mdps; ++k) {
    const std::uint64_t seed = mdp_seed + k;
    TabularMdp mdp = random_mdp(seed, base.mdp.n_states, base.mdp.n_actions, base.mdp.gamma, base.mdp.r_max);
    BehaviorPolicy behavior = random_policy(seed, base.mdp.n_states, base.mdp.n_actions);
    out.push_back(Problem{"mdp-" + std::to_string(k), std::move(mdp), std::move(behavior), base.features, nullptr});
  }
  out.insert(out.begin(), Problem{"mdp-0", std::move(base.mdp), std::move(base.behavior), std::move(base.features), nullptr});
  return out;
}

LearnerInit learner_init(const ConfigDocument& config, std::size_t n_features) {
  LearnerInit init;
  init.s0 = config.s0;
  auto to_vector = [&](const std::vector<double>& v, const char* name) {
    if (v.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features)).eval();
    if (v.size() != n_features) {
      throw ConfigError(std::string("learner.") + name + " has " + std::to_string(v.size()) + " entries, features have " +
                        std::to_string(n_features));
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  init.theta0 = to_vector(config.theta0, "theta0");
  init.omega0 = to_vector(config.omega0, "omega0");
  return init;
}

StepSchedule learner_schedule(const ConfigDocument& config) {
  if (config.schedule_a) {
    return StepSchedule::exponents(config.horizon, *config.schedule_a, *config.schedule_b, !config.allow_out_of_range);
  }
  if (config.alpha.size() == 1 && config.beta.size() == 1) {
    return StepSchedule::constant(config.horizon, config.alpha.front(), config.beta.front());
  }
  auto widen = [&](std::vector<double> v) {
    if (v.size() == 1) v.assign(std::max<std::size_t>(config.horizon, 1), v.front());
    return v;
  };
  return StepSchedule::sequences(config.horizon, widen(config.alpha), widen(config.beta));
}

ExperimentConfig experiment_config(const ConfigDocument& config, std::size_t n_features) {
  ExperimentConfig out;
  out.sigmas = config.sigmas;
  out.horizons = config.horizons;
  out.a_grid = config.a_grid;
  out.b_grid = config.b_grid;
  out.a = config.a;
  out.b = config.b;
  out.allow_out_of_range = config.allow_out_of_range;
  out.n_seeds = config.n_seeds;
  out.base_seed = config.seed;
  out.stride = config.stride;
  out.projection_radius = config.projection_radius;
  out.divergence_threshold = config.divergence_threshold;
  out.init = learner_init(config, n_features);
  out.output_dir = config.output_dir;
  out.config_digest = config.digest;
  out.config_echo = config.raw;
  return out;
}

}  // namespace ggq
