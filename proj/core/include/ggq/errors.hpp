#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ggq {

/// Malformed or inconsistent input (config, dimensions, ranges).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A standing assumption of the analysis does not hold for the given problem.
/// `assumption()` is the assumption number (1: non-singular C, 2: bounded
/// features, 3: geometric ergodicity, 4: policy smoothness).
class AssumptionError : public std::runtime_error {
 public:
  AssumptionError(int assumption, const std::string& what)
      : std::runtime_error("Assumption " + std::to_string(assumption) + " violated: " + what),
        assumption_(assumption) {}
  int assumption() const noexcept { return assumption_; }

 private:
  int assumption_;
};

/// The behavior chain is not uniformly ergodic (reducible, periodic, or a
/// pair with zero stationary mass).
class ErgodicityError : public AssumptionError {
 public:
  explicit ErgodicityError(const std::string& what) : AssumptionError(3, what) {}
};

/// The learner left the finite regime: NaN or parameter blow-up.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ggq
