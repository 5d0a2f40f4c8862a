#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ggq/errors.hpp"
#include "ggq/experiments.hpp"
#include "support.hpp"

using namespace ggq;
using Eigen::VectorXd;

namespace {

RunRecord curve(std::uint64_t seed, std::vector<double> grad, std::vector<double> track) {
  RunRecord r;
  r.seed = seed;
  for (std::size_t k = 0; k < grad.size(); ++k) r.t.push_back(k);
  r.grad_norm_sq = std::move(grad);
  r.tracking_sq = std::move(track);
  return r;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.sigmas = {1.0, 20.0};
  c.horizons = {200};
  c.n_seeds = 4;
  c.jobs = 1;
  c.config_digest = "feedface";
  c.init = {1, (VectorXd(2) << 1, 2).finished(), (VectorXd(2) << 0.1, 0.1).finished()};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ggq_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("aggregate") {
  SUBCASE("one record has zero standard error") {
    const auto s = aggregate({curve(0, {4, 2}, {1, 1})});
    CHECK(s.n == 1);
    CHECK(s.mean_grad_sq == std::vector<double>{4, 2});
    CHECK(s.stderr_grad_sq == std::vector<double>{0, 0});
  }
  SUBCASE("constant curves 1 and 3 give mean 2 and stderr 1") {
    const auto s = aggregate({curve(0, {1, 1, 1}, {1, 1, 1}), curve(1, {3, 3, 3}, {3, 3, 3})});
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(s.mean_grad_sq[k] == doctest::Approx(2.0));
      CHECK(s.stderr_grad_sq[k] == doctest::Approx(1.0));
      CHECK(s.mean_tracking_sq[k] == doctest::Approx(2.0));
      CHECK(s.stderr_tracking_sq[k] == doctest::Approx(1.0));
    }
  }
  SUBCASE("record order does not matter, bit for bit") {
    std::vector<RunRecord> recs;
    CounterRng rng(1);
    for (std::uint64_t s = 0; s < 12; ++s) {
      std::vector<double> g(5), z(5);
      for (auto& x : g) x = rng.uniform() * std::pow(10.0, rng.uniform(-8, 3));
      for (auto& x : z) x = rng.uniform();
      recs.push_back(curve(s, g, z));
    }
    const auto base = aggregate(recs);
    std::mt19937 shuffler(3);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(recs.begin(), recs.end(), shuffler);
      const auto s = aggregate(recs);
      CHECK(s.mean_grad_sq == base.mean_grad_sq);
      CHECK(s.stderr_grad_sq == base.stderr_grad_sq);
      CHECK(s.mean_tracking_sq == base.mean_tracking_sq);
    }
  }
  SUBCASE("matches a two-pass computation") {
    std::vector<RunRecord> recs;
    std::vector<double> xs{0.3, 1.7, 2.2, 0.9, 5.0};
    for (std::size_t i = 0; i < xs.size(); ++i) recs.push_back(curve(i, {xs[i]}, {0}));
    double mean = 0;
    for (double x : xs) mean += x / 5;
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const auto s = aggregate(recs);
    CHECK(s.mean_grad_sq[0] == doctest::Approx(mean).epsilon(1e-15));
    CHECK(s.stderr_grad_sq[0] == doctest::Approx(std::sqrt(ss / 4 / 5)).epsilon(1e-14));
  }
  SUBCASE("length mismatch names the seeds") {
    try {
      (void)aggregate({curve(7, {1, 2}, {1, 2}), curve(8, {1}, {1}), curve(9, {1, 2}, {1, 2})});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find('7') != std::string::npos);
      CHECK(msg.find('8') != std::string::npos);
    }
  }
}

TEST_CASE("fit_log_log") {
  SUBCASE("exact power law") {
    std::vector<double> x{100, 1000, 10000, 100000};
    std::vector<double> y;
    for (double t : x) y.push_back(3.0 * std::pow(t, -1.0 / 3));
    const auto f = fit_log_log(x, y);
    CHECK_FALSE(f.degenerate);
    CHECK(f.points == 4);
    CHECK(f.slope == doctest::Approx(-1.0 / 3).epsilon(1e-12));
    CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(f.residual == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("all zeros are degenerate") {
    const auto f = fit_log_log({10, 100, 1000}, {0, 0, 0});
    CHECK(f.degenerate);
    CHECK(f.points == 0);
  }
  SUBCASE("size mismatch") { CHECK_THROWS_AS(fit_log_log({1, 2}, {1}), ConfigError); }
}

TEST_CASE("fig1_sweep") {
  const auto p = testing::uniform_problem();
  SUBCASE("one sigma and one seed reproduce the single run") {
    auto c = small_config();
    c.sigmas = {2.0};
    c.n_seeds = 1;
    c.base_seed = 5;
    const auto res = fig1_sweep(p, c);
    REQUIRE(res.cells.size() == 1);
    const auto rec = run(p.mdp, p.behavior, p.features, SoftmaxPolicy(2.0), c.init,
                         {StepSchedule::exponents(200, c.a, c.b), {}, 0, 5, "", 1e6}, p.oracle.get());
    CHECK(res.cells[0].curves.mean_grad_sq == rec.grad_norm_sq);
    CHECK(res.cells[0].curves.mean_tracking_sq == rec.tracking_sq);
    CHECK(res.cells[0].mean_selected_grad_sq == rec.selected_grad_norm_sq);
    CHECK(res.cells[0].stderr_selected_grad_sq == 0.0);
    CHECK(res.cells[0].completed == 1);
    CHECK_FALSE(res.partial);
  }
  SUBCASE("one cell per sigma") {
    auto c = small_config();
    c.sigmas = {1, 2, 3, 15, 20};
    const auto res = fig1_sweep(p, c);
    CHECK(res.cells.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(res.cells[i].key.sigma == c.sigmas[i]);
      CHECK(res.cells[i].completed == 4);
      CHECK(res.cells[i].curves.t.size() == 201);
    }
  }
  SUBCASE("out-of-range exponents need the opt-in") {
    auto c = small_config();
    c.a = c.b = 1.0 / 3;
    CHECK_THROWS_AS(fig1_sweep(p, c), ConfigError);
    c.allow_out_of_range = true;
    CHECK_NOTHROW(fig1_sweep(p, c));
  }
  SUBCASE("divergent seeds are reported, not thrown") {
    auto c = small_config();
    c.sigmas = {1.0};
    c.divergence_threshold = 2.0;
    const auto res = fig1_sweep(p, c);
    CHECK(res.partial);
    CHECK(res.cells[0].errors.size() == 4);
    CHECK(res.cells[0].errors[0].find("diverged") != std::string::npos);
  }
}

TEST_CASE("worker count does not change results") {
  const auto p = testing::random_problem(3);
  auto c = small_config();
  c.n_seeds = 6;
  const auto d1 = scratch("jobs1");
  const auto d4 = scratch("jobs4");
  c.output_dir = d1;
  const auto r1 = fig1_sweep(p, c);
  c.jobs = 4;
  c.output_dir = d4;
  const auto r4 = fig1_sweep(p, c);
  for (std::size_t i = 0; i < r1.cells.size(); ++i) {
    CHECK(r1.cells[i].curves.mean_grad_sq == r4.cells[i].curves.mean_grad_sq);
    CHECK(r1.cells[i].mean_selected_grad_sq == r4.cells[i].mean_selected_grad_sq);
  }
  for (const char* f : {"aggregate.csv", "summary.csv"}) CHECK(slurp(d1 / f) == slurp(d4 / f));
  for (const auto& e : std::filesystem::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    CHECK(slurp(e.path()) == slurp(d4 / std::filesystem::relative(e.path(), d1)));
  }
  CHECK(slurp(d1 / "aggregate.csv").find("feedface") != std::string::npos);
  CHECK(slurp(d1 / "summary.csv").find("feedface") != std::string::npos);
  CHECK(slurp(d1 / "manifest.json").find("feedface") != std::string::npos);
  CHECK(slurp(d1 / "aggregate.csv").rfind("sigma,a,b,T,t,mean_grad_sq,stderr_grad_sq", 0) == 0);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d4);
}

TEST_CASE("parallel_for") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 8, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 4) throw ConfigError("boom"); }), ConfigError);
}

TEST_CASE("rate_study") {
  auto c = small_config();
  c.sigmas = {1.0};
  c.horizons = {50, 100, 200, 400};
  SUBCASE("frozen zero-reward problem is degenerate") {
    auto p = testing::uniform_problem();
    std::fill(p.mdp.reward.begin(), p.mdp.reward.end(), 0.0);
    p = Problem::make("zero", p.mdp, p.behavior, p.features);
    c.init = {1, VectorXd::Zero(2), VectorXd::Zero(2)};
    const auto res = rate_study(p, c);
    REQUIRE(res.fit.has_value());
    CHECK(res.fit->degenerate);
    for (const auto& cell : res.cells) CHECK(cell.mean_selected_grad_sq == 0.0);
  }
  SUBCASE("one cell per T with a fitted slope") {
    const auto res = rate_study(testing::uniform_problem(), c);
    CHECK(res.cells.size() == 4);
    REQUIRE(res.fit.has_value());
    CHECK(res.fit->points == 4);
    CHECK(std::isfinite(res.fit->slope));
  }
  SUBCASE("needs two T values") {
    c.horizons = {100};
    CHECK_THROWS_AS(rate_study(testing::uniform_problem(), c), ConfigError);
  }
}

TEST_CASE("stepsize_grid") {
  const auto p = testing::uniform_problem();
  auto c = small_config();
  c.sigmas = {1.0};
  c.n_seeds = 2;
  c.horizons = {100};
  SUBCASE("grid with b <= a runs every admissible cell") {
    c.a_grid = {0.55, 0.65, 0.75, 0.85};
    c.b_grid = {0.15, 0.25, 0.35, 0.45};
    const auto dir = scratch("grid");
    c.output_dir = dir;
    c.write_cell_files = false;
    const auto res = stepsize_grid(p, c);
    CHECK(res.cells.size() == 16);
    CHECK(res.ranking.size() == 16);
    for (std::size_t i = 1; i < res.ranking.size(); ++i)
      CHECK(res.cells[res.ranking[i - 1]].mean_selected_grad_sq <= res.cells[res.ranking[i]].mean_selected_grad_sq);
    std::ifstream in(dir / "aggregate.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1 + 16 * 101);
    std::filesystem::remove_all(dir);
  }
  SUBCASE("b = a boundary is included") {
    c.a_grid = {0.7};
    c.b_grid = {0.3, 0.7, 0.9};
    const auto res = stepsize_grid(p, c);
    REQUIRE(res.cells.size() == 2);
    CHECK(res.cells[1].key.b == 0.7);
  }
  SUBCASE("empty grid") {
    c.a_grid = {0.6};
    c.b_grid = {0.8};
    CHECK_THROWS_AS(stepsize_grid(p, c), ConfigError);
  }
}

TEST_CASE("mixing_report") {
  std::vector<Problem> probs{testing::uniform_problem()};
  for (std::uint64_t s = 1; s <= 3; ++s) probs.push_back(testing::random_problem(s));
  BehaviorPolicy stuck{4, 2, {1, 0, 1, 0, 1, 0, 1, 0}};
  auto bad = probs[1];
  bad.behavior = stuck;
  probs.push_back(bad);
  const auto rep = mixing_report(probs, 30);
  REQUIRE(rep.size() == 5);
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(rep[i].profile.has_value());
    CHECK(rep[i].profile->tv.size() == 30);
  }
  CHECK(rep[0].profile->degenerate);
  CHECK_FALSE(rep[4].profile.has_value());
  CHECK_FALSE(rep[4].error.empty());

  const auto dir = scratch("mixing");
  write_mixing_csv(rep, dir / "mixing.csv");
  CHECK(slurp(dir / "mixing.csv").find(probs[2].name) != std::string::npos);
  std::filesystem::remove_all(dir);
}
