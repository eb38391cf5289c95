#pragma once

#include <string>
#include <vector>

#include "padrl/policy.hpp"
#include "padrl/prompt.hpp"

namespace padrl {

struct LengthRewardConfig {
  double l_budget = 32.0;  // tokens
  double alpha = 0.005;    // reward per token below budget
  double delta = 0.5;      // reward at exactly the budget
  double w_len = 0.5;      // weight in the composed reward

  bool operator==(const LengthRewardConfig&) const = default;
};

std::vector<std::string> violations(const LengthRewardConfig& cfg);

struct RewardBreakdown {
  int r_acc = 0;
  double r_len = 0.0;
  double r_total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

/// Efficient-length reward: clamp(alpha * (budget - length) + delta, 0, 1).
double length_reward(std::size_t length, const LengthRewardConfig& cfg);

/// r_total = r_acc + w_len * r_len. With the length term disabled r_len is
/// recorded as 0 and contributes nothing.
RewardBreakdown total_reward(const Prompt& prompt, const TokenSequence& seq, const LengthRewardConfig& cfg,
                             bool length_reward_enabled);

}  // namespace padrl
