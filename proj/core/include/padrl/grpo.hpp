#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "padrl/pad.hpp"
#include "padrl/policy.hpp"

namespace padrl {

// Entropy-bonus coefficient: flat at beta0 for `warmup_steps`, then
// exponential decay by `decay_lambda` per step, floored at beta_min.
struct EntropySchedule {
  double beta0 = 0.02;
  double beta_min = 0.0;
  double decay_lambda = 0.985;
  std::int64_t warmup_steps = 140;

  bool operator==(const EntropySchedule&) const = default;
};

double entropy_coef(const EntropySchedule& schedule, std::int64_t step);

enum class RatioLevel { token, sequence };

std::string_view to_string(RatioLevel level);
RatioLevel parse_ratio_level(std::string_view name);

struct GrpoConfig {
  double clip_eps = 0.2;
  double kl_coef = 2e-3;
  bool kl_enabled = false;
  EntropySchedule entropy;
  double learning_rate = 30.0;
  double max_grad_norm = 1.0;
  RatioLevel ratio_level = RatioLevel::token;
  // Sequential updates per rollout batch; the distilled batch is split into
  // this many contiguous minibatches.
  int minibatches = 1;

  bool operator==(const GrpoConfig&) const = default;
};

std::vector<std::string> violations(const GrpoConfig& cfg);

struct LossReport {
  double surrogate_loss = 0.0;
  double kl_penalty = 0.0;
  double entropy_bonus = 0.0;  // mean token entropy of the batch (nats)
  double total_loss = 0.0;
  double clip_fraction = 0.0;
  double grad_norm_pre_clip = 0.0;
};

struct LossTerm {
  double value = 0.0;
  ParamTensor gradient;
};

struct SurrogateResult {
  LossTerm loss;          // minus the clipped objective
  double clip_fraction = 0.0;
};

/// Clipped surrogate against the behavior log-probs stored in each rollout.
/// The gradient is zero wherever the min picks the clipped constant branch.
/// Returns nullopt for an empty batch: the caller skips the step.
std::optional<SurrogateResult> surrogate_loss(const PolicyParams& params, std::span<const Rollout> batch,
                                              const GrpoConfig& cfg);

/// Per-token k3 estimator exp(d) - d - 1, d = log pi_ref - log pi_theta,
/// averaged over the batch tokens.
LossTerm kl_penalty(const PolicyParams& params, const PolicyParams& ref, std::span<const Rollout> batch);

/// Mean token entropy of the batch and its gradient.
LossTerm entropy_term(const PolicyParams& params, std::span<const Rollout> batch);

struct StepLoss {
  LossReport report;
  ParamTensor gradient;  // d(total_loss)/d(logits)
};

/// total = surrogate + kl_coef * kl (when enabled) - beta(step) * entropy.
std::optional<StepLoss> total_loss(const PolicyParams& params, const PolicyParams& ref,
                                   std::span<const Rollout> batch, const GrpoConfig& cfg, std::int64_t step);

double global_norm(std::span<const double> v);

/// Clips `gradient` to max_grad_norm and descends. Returns the pre-clip norm.
/// Throws DivergedError on a non-finite gradient.
double apply_update(PolicyParams& params, std::span<const double> gradient, const GrpoConfig& cfg);

class DivergedError : public std::runtime_error {
public:
  DivergedError() : std::runtime_error("diverged") {}
};

}  // namespace padrl
