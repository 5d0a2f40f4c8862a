#include "ggq/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ggq/errors.hpp"

namespace ggq {

double TabularMdp::expected_reward(std::size_t s, std::size_t a) const {
  double sum = 0.0;
  for (std::size_t next = 0; next < n_states; ++next) sum += p(s, a, next) * r(s, a, next);
  return sum;
}

std::string ValidationReport::summary() const {
  if (ok()) return "pass";
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) out << "; ";
    out << violations[i];
  }
  return out.str();
}

ValidationReport validate_mdp(const TabularMdp& mdp) {
  ValidationReport report;
  auto& v = report.violations;
  if (mdp.n_states == 0) v.push_back("n_states must be positive");
  if (mdp.n_actions == 0) v.push_back("n_actions must be positive");
  const std::size_t expected = mdp.n_states * mdp.n_actions * mdp.n_states;
  if (mdp.kernel.size() != expected) {
    v.push_back("kernel has " + std::to_string(mdp.kernel.size()) + " entries, expected " +
                std::to_string(expected));
  }
  if (mdp.reward.size() != expected) {
    v.push_back("reward has " + std::to_string(mdp.reward.size()) + " entries, expected " +
                std::to_string(expected));
  }
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    v.push_back("gamma " + std::to_string(mdp.gamma) + " outside (0, 1)");
  }
  if (!(mdp.r_max >= 0.0)) v.push_back("r_max must be nonnegative");
  if (!v.empty()) return report;

  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double row = 0.0;
      for (std::size_t next = 0; next < mdp.n_states; ++next) {
        const double p = mdp.p(s, a, next);
        const double r = mdp.r(s, a, next);
        const std::string where =
            "(" + std::to_string(s) + "," + std::to_string(a) + "," + std::to_string(next) + ")";
        if (!(p >= 0.0)) v.push_back("kernel entry " + where + " is negative");
        if (!(r >= 0.0)) v.push_back("reward " + where + " below 0: " + std::to_string(r));
        if (!(r <= mdp.r_max)) {
          v.push_back("reward " + where + " exceeds r_max: " + std::to_string(r));
        }
        row += p;
      }
      if (!(std::abs(row - 1.0) <= 1e-12)) {
        std::ostringstream msg;
        msg << "kernel row (" << s << "," << a << ") sums to " << row;
        v.push_back(msg.str());
      }
    }
  }
  return report;
}

ValidationReport validate_policy(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                 bool require_positive) {
  ValidationReport report;
  auto& v = report.violations;
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions ||
      policy.probs.size() != mdp.n_pairs()) {
    v.push_back("behavior policy shape does not match the MDP");
    return report;
  }
  for (std::size_t s = 0; s < policy.n_states; ++s) {
    double row = 0.0;
    for (std::size_t a = 0; a < policy.n_actions; ++a) {
      const double b = policy(s, a);
      if (!(b >= 0.0)) v.push_back("policy entry (" + std::to_string(s) + "," + std::to_string(a) + ") is negative");
      if (require_positive && !(b > 0.0)) {
        v.push_back("policy entry (" + std::to_string(s) + "," + std::to_string(a) +
                    ") is zero; every pair must be visited");
      }
      row += b;
    }
    if (!(std::abs(row - 1.0) <= 1e-12)) {
      std::ostringstream msg;
      msg << "policy row " << s << " sums to " << row;
      v.push_back(msg.str());
    }
  }
  return report;
}

Eigen::MatrixXd state_action_chain(const TabularMdp& mdp, const BehaviorPolicy& policy) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions ||
      policy.probs.size() != mdp.n_pairs() || mdp.kernel.size() != mdp.n_pairs() * mdp.n_states) {
    throw ConfigError("state_action_chain: MDP and behavior policy dimensions differ");
  }
  const std::size_t n = mdp.n_pairs();
  Eigen::MatrixXd chain(n, n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.pair_index(s, a);
      for (std::size_t next = 0; next < mdp.n_states; ++next) {
        for (std::size_t next_a = 0; next_a < mdp.n_actions; ++next_a) {
          chain(row, mdp.pair_index(next, next_a)) = mdp.p(s, a, next) * policy(next, next_a);
        }
      }
    }
  }
  return chain;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain,
                                        const StationaryOptions& options) {
  const auto n = chain.rows();
  if (n == 0 || chain.cols() != n) throw ConfigError("stationary_distribution: chain must be square");
  if ((chain.array() < 0.0).any()) throw ConfigError("stationary_distribution: negative entry");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(chain.row(i).sum() - 1.0) > 1e-12) {
      throw ConfigError("stationary_distribution: row " + std::to_string(i) + " is not a distribution");
    }
  }

  // chain^(2^k): k squarings cover 2^k single-step iterations.
  std::size_t squarings = 0;
  while ((std::size_t{1} << squarings) < options.max_iterations && squarings < 62) ++squarings;

  Eigen::MatrixXd power = chain;
  bool merged = false;
  for (std::size_t k = 0; k <= squarings; ++k) {
    const Eigen::RowVectorXd first = power.row(0);
    const double spread = (power.rowwise() - first).cwiseAbs().maxCoeff();
    if (spread <= options.tolerance) {
      merged = true;
      break;
    }
    if (k == squarings) break;
    power = (power * power).eval();
    for (Eigen::Index i = 0; i < n; ++i) power.row(i) /= power.row(i).sum();
  }
  if (!merged) {
    throw ErgodicityError("power iteration did not converge within " +
                          std::to_string(options.max_iterations) +
                          " iterations (chain reducible or periodic)");
  }

  Eigen::RowVectorXd mu = power.colwise().mean();
  mu /= mu.sum();
  for (std::size_t it = 0; it < 1000; ++it) {
    Eigen::RowVectorXd next = mu * chain;
    next /= next.sum();
    const double change = (next - mu).cwiseAbs().sum();
    mu = next;
    if (change <= options.tolerance) break;
  }
  if ((mu.array() <= 0.0).any()) {
    throw ErgodicityError("stationary distribution has a pair with zero mass");
  }
  return mu.transpose();
}

void fit_geometric_decay(MixingProfile& profile) {
  std::size_t count = 0;
  while (count < profile.tv.size() && profile.tv[count] > kTvZeroFloor) ++count;
  profile.fit_points = count;
  if (count < 2) {
    profile.degenerate = true;
    profile.fitted_rho = 0.0;
    profile.fitted_m = profile.tv.empty() ? 0.0 : profile.tv.front();
    profile.fit_residual = 0.0;
    return;
  }
  Eigen::MatrixXd design(count, 2);
  Eigen::VectorXd target(count);
  for (std::size_t t = 0; t < count; ++t) {
    design(t, 0) = 1.0;
    design(t, 1) = static_cast<double>(t);
    target(t) = std::log(profile.tv[t]);
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(target);
  profile.fitted_m = std::exp(coef(0));
  profile.fitted_rho = std::exp(coef(1));
  profile.fit_residual = std::sqrt((design * coef - target).squaredNorm() / static_cast<double>(count));
  profile.degenerate = !(profile.fitted_rho > 0.0 && profile.fitted_rho < 1.0);
}

MixingProfile mixing_profile(const Eigen::MatrixXd& chain, std::size_t horizon) {
  if (horizon < 2) throw ConfigError("mixing_profile: horizon must be at least 2");
  const Eigen::VectorXd mu = stationary_distribution(chain);
  const auto n = chain.rows();

  MixingProfile profile;
  profile.tv.reserve(horizon);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t t = 0; t < horizon; ++t) {
    const double tv = 0.5 * (power.rowwise() - mu.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
    profile.tv.push_back(std::clamp(tv, 0.0, 1.0));
    power = (power * chain).eval();
  }
  fit_geometric_decay(profile);
  return profile;
}

MixingProfile mixing_profile(const TabularMdp& mdp, const BehaviorPolicy& policy,
                             std::size_t horizon) {
  return mixing_profile(state_action_chain(mdp, policy), horizon);
}

Transition sample_transition(const TabularMdp& mdp, const BehaviorPolicy& policy, std::size_t s,
                             CounterRng& rng) {
  if (s >= mdp.n_states) throw std::out_of_range("sample_transition: state id out of range");
  Transition o;
  o.s = s;
  o.a = rng.categorical(std::span<const double>(policy.probs.data() + s * policy.n_actions,
                                                policy.n_actions));
  o.s_next = rng.categorical(
      std::span<const double>(mdp.kernel.data() + mdp.triple_index(s, o.a, 0), mdp.n_states));
  o.r = mdp.r(s, o.a, o.s_next);
  return o;
}

std::vector<double> broadcast_reward(std::size_t n_states, std::size_t n_actions,
                                     const std::vector<double>& reward_sa) {
  if (reward_sa.size() != n_states * n_actions) {
    throw ConfigError("reward table r[s][a] has wrong size");
  }
  std::vector<double> out(n_states * n_actions * n_states);
  for (std::size_t pair = 0; pair < n_states * n_actions; ++pair) {
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(pair * n_states), n_states, reward_sa[pair]);
  }
  return out;
}

TabularMdp uniform_kernel_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                              const std::vector<double>& reward_sa, double r_max) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_max = r_max;
  mdp.kernel.assign(n_states * n_actions * n_states, 1.0 / static_cast<double>(n_states));
  mdp.reward = broadcast_reward(n_states, n_actions, reward_sa);
  return mdp;
}

std::vector<double> random_rewards(std::uint64_t seed, std::size_t n_states,
                                   std::size_t n_actions, double r_max) {
  CounterRng rng(seed, 0x52455744);  // "REWD"
  std::vector<double> out(n_states * n_actions);
  for (auto& r : out) r = rng.uniform(0.0, r_max);
  return out;
}

TabularMdp random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                      double gamma, double r_max) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_max = r_max;
  mdp.kernel.resize(n_states * n_actions * n_states);
  CounterRng rng(seed, 0x4B45524E);  // "KERN"
  for (std::size_t pair = 0; pair < n_states * n_actions; ++pair) {
    auto row = mdp.kernel.begin() + static_cast<std::ptrdiff_t>(pair * n_states);
    double sum = 0.0;
    for (std::size_t j = 0; j < n_states; ++j) {
      row[static_cast<std::ptrdiff_t>(j)] = rng.uniform();
      sum += row[static_cast<std::ptrdiff_t>(j)];
    }
    for (std::size_t j = 0; j < n_states; ++j) row[static_cast<std::ptrdiff_t>(j)] /= sum;
  }
  mdp.reward = broadcast_reward(n_states, n_actions, random_rewards(seed, n_states, n_actions, r_max));
  return mdp;
}

BehaviorPolicy uniform_policy(std::size_t n_states, std::size_t n_actions) {
  return BehaviorPolicy{n_states, n_actions,
                        std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions))};
}

BehaviorPolicy random_policy(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                             double min_prob) {
  BehaviorPolicy policy{n_states, n_actions, std::vector<double>(n_states * n_actions)};
  CounterRng rng(seed, 0x504F4C49);  // "POLI"
  for (std::size_t s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      policy.probs[s * n_actions + a] = rng.uniform(min_prob, 1.0);
      sum += policy.probs[s * n_actions + a];
    }
    for (std::size_t a = 0; a < n_actions; ++a) policy.probs[s * n_actions + a] /= sum;
  }
  return policy;
}

}  // namespace ggq
