#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "padrl/policy.hpp"
#include "padrl/rewards.hpp"

namespace padrl {

struct Rollout {
  TokenSequence seq;
  std::vector<double> behavior_logprobs;  // one per token, from the snapshot that generated seq
  RewardBreakdown reward;
  double advantage = 0.0;

  bool operator==(const Rollout&) const = default;
};

struct Group {
  std::uint64_t prompt_id = 0;
  std::vector<Rollout> rollouts;
};

inline constexpr double kDefaultEpsStability = 1e-6;

/// Group-relative advantages over r_total:
///   A_i = (r_i - mean(r)) / (std(r) + eps_stability)
/// with the population standard deviation. A group whose rewards are all equal
/// gets advantages of exactly zero. Throws "degenerate group" when G < 2.
Group estimate_advantages(Group group, double eps_stability = kDefaultEpsStability);

/// Per-group estimation, flattened in group order then rollout order.
std::vector<Rollout> batch_advantages(std::vector<Group> groups, double eps_stability = kDefaultEpsStability);

}  // namespace padrl
