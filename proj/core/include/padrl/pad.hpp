#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "padrl/advantage.hpp"

namespace padrl {

// Linear decay of the sampling temperature, clamped at tau_end past the
// horizon.
struct TemperatureSchedule {
  double tau_start = 1.0;
  double tau_end = 0.3;
  std::int64_t horizon = 2000;

  bool operator==(const TemperatureSchedule&) const = default;
};

double tau_at(const TemperatureSchedule& schedule, std::int64_t step);

/// What the sampling softmax is taken over. `absolute` uses |A| (the
/// effective-set map stores magnitudes); `signed_advantage` uses A itself.
enum class PriorityMode { absolute, signed_advantage };

std::string_view to_string(PriorityMode mode);
PriorityMode parse_priority_mode(std::string_view name);

struct PadConfig {
  double t_low = 0.05;
  double t_high = 10.0;
  double rho = 0.5;
  PriorityMode priority = PriorityMode::absolute;
  TemperatureSchedule tau;

  bool operator==(const PadConfig&) const = default;
};

std::vector<std::string> violations(const PadConfig& cfg);

struct EffectiveSet {
  std::vector<std::size_t> indices;   // into the source batch, ascending
  std::vector<double> abs_advantage;  // |A_i| for each retained index

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

/// { i : t_low <= |A_i| <= t_high }, both bounds inclusive.
EffectiveSet filter_effective(std::span<const Rollout> batch, double t_low, double t_high);

/// exp(s_i / tau) / sum_j exp(s_j / tau) over the effective set, where s is
/// the priority score of each member. Falls back to uniform when the
/// normalizer is not a positive finite number. Throws on an empty set.
std::vector<double> sampling_probabilities(std::span<const double> scores, double tau);
std::vector<double> sampling_probabilities(const EffectiveSet& set, double tau);

/// Weighted sampling of k distinct positions without replacement, using
/// Gumbel-perturbed log-weights (exponential keys). Returns positions into
/// `log_weights` in draw order. Entries of -inf are never chosen.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> log_weights, std::size_t k,
                                                             std::uint64_t seed);

// Selected rollouts are kept in source-batch order.
struct DistilledBatch {
  std::vector<Rollout> selected;
  std::vector<std::size_t> selected_indices;
  std::size_t effective_set_size = 0;
  std::size_t k_prime = 0;

  bool empty() const noexcept { return selected.empty(); }
};

/// min(ceil(rho * n), cap).
std::size_t subsample_size(double rho, std::size_t n, std::size_t cap);

/// Filter, then draw k' = min(ceil(rho N), |E|) members of E with
/// probabilities from sampling_probabilities at tau_at(step). Empty E yields an
/// empty batch.
DistilledBatch distill(std::span<const Rollout> batch, const PadConfig& cfg, std::int64_t step, std::uint64_t seed);

enum class Strategy { pad, grpo_baseline, grpo_filter, random_sampling };

std::string_view to_string(Strategy s);
/// Throws std::invalid_argument naming the valid strategies.
Strategy parse_strategy(std::string_view name);
inline constexpr std::string_view kStrategyNames = "pad, grpo_baseline, grpo_filter, random_sampling";

/// pad: distill. grpo_baseline: whole batch in order. grpo_filter: all of E in
/// order. random_sampling: min(ceil(rho N), N) uniform draws without
/// replacement from the whole batch.
DistilledBatch select_strategy(Strategy strategy, std::span<const Rollout> batch, const PadConfig& cfg,
                               std::int64_t step, std::uint64_t seed);

}  // namespace padrl
