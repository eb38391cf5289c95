#include "padrl/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace padrl {

Group estimate_advantages(Group group, double eps_stability) {
  auto& rs = group.rollouts;
  if (rs.size() < 2) throw std::invalid_argument("degenerate group");
  if (!(eps_stability > 0.0)) throw std::invalid_argument("eps_stability must be > 0");
  for (const auto& r : rs)
    if (r.seq.prompt_id != group.prompt_id) throw std::invalid_argument("rollout prompt_id differs from its group");

  const double first = rs.front().reward.r_total;
  bool uniform = true;
  for (const auto& r : rs) uniform = uniform && r.reward.r_total == first;
  if (uniform) {
    // Exact zeros; the mean of equal reals need not round back to the value.
    for (auto& r : rs) r.advantage = 0.0;
    return group;
  }

  const double n = static_cast<double>(rs.size());
  double mean = 0.0;
  for (const auto& r : rs) mean += r.reward.r_total;
  mean /= n;
  double var = 0.0;
  for (const auto& r : rs) var += (r.reward.r_total - mean) * (r.reward.r_total - mean);
  const double std_dev = std::sqrt(var / n);
  for (auto& r : rs) r.advantage = (r.reward.r_total - mean) / (std_dev + eps_stability);
  return group;
}

std::vector<Rollout> batch_advantages(std::vector<Group> groups, double eps_stability) {
  std::vector<Rollout> flat;
  for (auto& g : groups) {
    auto done = estimate_advantages(std::move(g), eps_stability);
    for (auto& r : done.rollouts) flat.push_back(std::move(r));
  }
  return flat;
}

}  // namespace padrl
