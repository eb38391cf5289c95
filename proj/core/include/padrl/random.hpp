#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace padrl {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a child seed from a root seed and a path of indices
/// (e.g. stage, step, prompt slot, rollout index).
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept;

// Thin wrapper over mt19937_64 whose floating-point draws are defined here
// rather than by the standard library, so streams are identical across
// toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1); never returns 0.
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

private:
  std::mt19937_64 engine_;
};

}  // namespace padrl
