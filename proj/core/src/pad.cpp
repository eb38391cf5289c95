#include "padrl/pad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "padrl/random.hpp"

namespace padrl {

double tau_at(const TemperatureSchedule& schedule, std::int64_t step) {
  if (step < 0) throw std::invalid_argument("step must be >= 0");
  if (step >= schedule.horizon) return schedule.tau_end;
  const double frac = static_cast<double>(step) / static_cast<double>(schedule.horizon);
  return schedule.tau_start + (schedule.tau_end - schedule.tau_start) * frac;
}

std::string_view to_string(PriorityMode mode) {
  return mode == PriorityMode::absolute ? "absolute" : "signed";
}

PriorityMode parse_priority_mode(std::string_view name) {
  if (name == "absolute") return PriorityMode::absolute;
  if (name == "signed") return PriorityMode::signed_advantage;
  throw std::invalid_argument("unknown priority mode '" + std::string(name) + "' (expected absolute or signed)");
}

std::vector<std::string> violations(const PadConfig& cfg) {
  std::vector<std::string> out;
  if (!(cfg.t_low > 0.0)) out.emplace_back("t_low must be > 0");
  if (!(cfg.t_high >= cfg.t_low)) out.emplace_back("t_high must be >= t_low");
  if (!(cfg.rho > 0.0 && cfg.rho <= 1.0)) out.emplace_back("rho ∈ (0,1]");
  const auto& tau = cfg.tau;
  if (!(tau.tau_end > 0.0 && tau.tau_start >= tau.tau_end)) out.emplace_back("tau schedule must satisfy tau_start >= tau_end > 0");
  if (tau.horizon < 1) out.emplace_back("tau horizon must be >= 1");
  return out;
}

EffectiveSet filter_effective(std::span<const Rollout> batch, double t_low, double t_high) {
  EffectiveSet set;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double mag = std::abs(batch[i].advantage);
    if (t_low <= mag && mag <= t_high) {
      set.indices.push_back(i);
      set.abs_advantage.push_back(mag);
    }
  }
  return set;
}

std::vector<double> sampling_probabilities(std::span<const double> scores, double tau) {
  if (scores.empty()) throw std::invalid_argument("empty effective set");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  const std::size_t n = scores.size();
  std::vector<double> p(n);
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  if (std::isfinite(m)) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::exp((scores[i] - m) / tau);
      z += p[i];
    }
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
    return p;
  }
  for (double& v : p) v /= z;
  return p;
}

namespace {

std::vector<double> priority_scores(std::span<const Rollout> batch, const EffectiveSet& set, PriorityMode mode) {
  if (mode == PriorityMode::absolute) return set.abs_advantage;
  std::vector<double> s;
  s.reserve(set.size());
  for (std::size_t i : set.indices) s.push_back(batch[i].advantage);
  return s;
}

}  // namespace

std::vector<double> sampling_probabilities(const EffectiveSet& set, double tau) {
  return sampling_probabilities(set.abs_advantage, tau);
}

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> log_weights, std::size_t k,
                                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    // Gumbel(0,1) = -log(-log U); top-k of log w + G is a draw without
    // replacement with probabilities proportional to w.
    const double gumbel = -std::log(-std::log(rng.uniform_open()));
    if (log_weights[i] == -std::numeric_limits<double>::infinity()) continue;
    keys.emplace_back(log_weights[i] + gumbel, i);
  }
  k = std::min(k, keys.size());
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(keys[i].second);
  return out;
}

std::size_t subsample_size(double rho, std::size_t n, std::size_t cap) {
  const auto want = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n)));
  return std::min(want, cap);
}

namespace {

DistilledBatch gather(std::span<const Rollout> batch, std::vector<std::size_t> indices, std::size_t effective) {
  DistilledBatch out;
  out.selected.reserve(indices.size());
  for (std::size_t i : indices) out.selected.push_back(batch[i]);
  out.selected_indices = std::move(indices);
  out.effective_set_size = effective;
  out.k_prime = out.selected.size();
  return out;
}

}  // namespace

DistilledBatch distill(std::span<const Rollout> batch, const PadConfig& cfg, std::int64_t step, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("distill requires a non-empty batch");
  const EffectiveSet set = filter_effective(batch, cfg.t_low, cfg.t_high);
  if (set.empty()) return gather(batch, {}, 0);

  const double tau = tau_at(cfg.tau, step);
  const auto probs = sampling_probabilities(priority_scores(batch, set, cfg.priority), tau);
  std::vector<double> log_w(probs.size());
  std::transform(probs.begin(), probs.end(), log_w.begin(), [](double p) { return std::log(p); });

  const std::size_t k = subsample_size(cfg.rho, batch.size(), set.size());
  std::vector<std::size_t> picked;
  picked.reserve(k);
  for (std::size_t pos : weighted_sample_without_replacement(log_w, k, seed)) picked.push_back(set.indices[pos]);
  std::sort(picked.begin(), picked.end());
  return gather(batch, std::move(picked), set.size());
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::pad: return "pad";
    case Strategy::grpo_baseline: return "grpo_baseline";
    case Strategy::grpo_filter: return "grpo_filter";
    case Strategy::random_sampling: return "random_sampling";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "pad") return Strategy::pad;
  if (name == "grpo_baseline") return Strategy::grpo_baseline;
  if (name == "grpo_filter") return Strategy::grpo_filter;
  if (name == "random_sampling") return Strategy::random_sampling;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'; valid: " + std::string(kStrategyNames));
}

DistilledBatch select_strategy(Strategy strategy, std::span<const Rollout> batch, const PadConfig& cfg,
                               std::int64_t step, std::uint64_t seed) {
  switch (strategy) {
    case Strategy::pad:
      return distill(batch, cfg, step, seed);
    case Strategy::grpo_baseline: {
      std::vector<std::size_t> all(batch.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      return gather(batch, std::move(all), batch.size());
    }
    case Strategy::grpo_filter: {
      auto set = filter_effective(batch, cfg.t_low, cfg.t_high);
      const std::size_t n = set.size();
      return gather(batch, std::move(set.indices), n);
    }
    case Strategy::random_sampling: {
      const std::size_t k = subsample_size(cfg.rho, batch.size(), batch.size());
      const std::vector<double> flat(batch.size(), 0.0);
      auto picked = weighted_sample_without_replacement(flat, k, seed);
      std::sort(picked.begin(), picked.end());
      return gather(batch, std::move(picked), batch.size());
    }
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace padrl
