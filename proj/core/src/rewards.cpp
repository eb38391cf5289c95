#include "padrl/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "padrl/envs.hpp"

namespace padrl {

std::vector<std::string> violations(const LengthRewardConfig& cfg) {
  std::vector<std::string> out;
  if (!(cfg.l_budget > 0.0)) out.emplace_back("l_budget must be > 0");
  if (!(cfg.alpha > 0.0)) out.emplace_back("alpha must be > 0");
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) out.emplace_back("delta must be in [0, 1]");
  if (!(cfg.w_len >= 0.0)) out.emplace_back("w_len must be >= 0");
  return out;
}

double length_reward(std::size_t length, const LengthRewardConfig& cfg) {
  const double raw = cfg.alpha * (cfg.l_budget - static_cast<double>(length)) + cfg.delta;
  return std::max(0.0, std::min(1.0, raw));
}

RewardBreakdown total_reward(const Prompt& prompt, const TokenSequence& seq, const LengthRewardConfig& cfg,
                             bool length_reward_enabled) {
  RewardBreakdown r;
  r.r_acc = verify(prompt, seq);
  if (length_reward_enabled) {
    r.r_len = length_reward(seq.length(), cfg);
    r.r_total = r.r_acc + cfg.w_len * r.r_len;
  } else {
    r.r_total = r.r_acc;
  }
  return r;
}

}  // namespace padrl
