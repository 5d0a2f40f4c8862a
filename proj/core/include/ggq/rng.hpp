#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace ggq {

/// Counter-based 64-bit generator.
///
/// Draw i of stream (seed, stream) is `mix64(key + (i + 1) * 0x9E3779B97F4A7C15)`
/// where `key = mix64(seed ^ mix64(stream + 0xD1B54A32D192ED03))` and mix64 is
/// the SplitMix64 finalizer. The sequence depends only on (seed, stream, i), so
/// it is identical on every platform and any stream can be derived without
/// touching the others.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() noexcept;

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Inverse-CDF draw from an unnormalized-safe probability row. Entries must be
  /// nonnegative; the last index with positive mass absorbs rounding slack.
  std::size_t categorical(std::span<const double> probs) noexcept;

  /// Independent generator for `stream` under the same seed.
  CounterRng split(std::uint64_t stream) const noexcept { return CounterRng(seed_, stream); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const CounterRng&, const CounterRng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace ggq
