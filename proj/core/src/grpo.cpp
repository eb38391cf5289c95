#include "padrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace padrl {

double entropy_coef(const EntropySchedule& schedule, std::int64_t step) {
  if (step < 0) throw std::invalid_argument("step must be >= 0");
  if (step < schedule.warmup_steps) return schedule.beta0;
  const double decayed = schedule.beta0 * std::pow(schedule.decay_lambda, static_cast<double>(step - schedule.warmup_steps));
  return std::max(schedule.beta_min, decayed);
}

std::string_view to_string(RatioLevel level) { return level == RatioLevel::token ? "token" : "sequence"; }

RatioLevel parse_ratio_level(std::string_view name) {
  if (name == "token") return RatioLevel::token;
  if (name == "sequence") return RatioLevel::sequence;
  throw std::invalid_argument("unknown ratio_level '" + std::string(name) + "' (expected token or sequence)");
}

std::vector<std::string> violations(const GrpoConfig& cfg) {
  std::vector<std::string> out;
  if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0)) out.emplace_back("clip_eps ∈ (0,1)");
  if (!(cfg.kl_coef >= 0.0)) out.emplace_back("kl_coef must be >= 0");
  if (!(cfg.learning_rate > 0.0)) out.emplace_back("learning_rate must be > 0");
  if (!(cfg.max_grad_norm > 0.0)) out.emplace_back("max_grad_norm must be > 0");
  if (cfg.minibatches < 1) out.emplace_back("minibatches must be >= 1");
  const auto& e = cfg.entropy;
  if (!(e.beta_min <= e.beta0)) out.emplace_back("entropy.beta_min must be <= entropy.beta0");
  if (!(e.decay_lambda > 0.0 && e.decay_lambda <= 1.0)) out.emplace_back("entropy.decay_lambda ∈ (0,1]");
  if (e.warmup_steps < 0) out.emplace_back("entropy.warmup_steps must be >= 0");
  return out;
}

namespace {

struct Clipped {
  double objective;
  bool clipped;  // the constant clipped branch strictly wins the min
};

Clipped clipped_objective(double ratio, double adv, double eps) {
  const double unclipped = ratio * adv;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
  if (clipped < unclipped) return {clipped, true};
  return {unclipped, false};
}

std::size_t token_count(std::span<const Rollout> batch) {
  std::size_t n = 0;
  for (const auto& r : batch) n += r.seq.tokens.size();
  return n;
}

}  // namespace

std::optional<SurrogateResult> surrogate_loss(const PolicyParams& params, std::span<const Rollout> batch,
                                              const GrpoConfig& cfg) {
  if (batch.empty()) return std::nullopt;
  SurrogateResult out;
  out.loss.gradient.assign(params.size(), 0.0);
  double objective = 0.0;
  std::size_t clipped = 0;
  std::size_t terms = 0;

  if (cfg.ratio_level == RatioLevel::token) {
    const std::size_t n_tok = token_count(batch);
    if (n_tok == 0) return std::nullopt;
    const double inv = 1.0 / static_cast<double>(n_tok);
    std::vector<double> weights;
    for (const auto& r : batch) {
      if (r.behavior_logprobs.size() != r.seq.tokens.size())
        throw std::invalid_argument("behavior log-probs must have one entry per token");
      const auto lp = sequence_logprob(params, r.seq);
      weights.assign(lp.per_token.size(), 0.0);
      for (std::size_t t = 0; t < lp.per_token.size(); ++t) {
        const double ratio = std::exp(lp.per_token[t] - r.behavior_logprobs[t]);
        const auto c = clipped_objective(ratio, r.advantage, cfg.clip_eps);
        objective += c.objective;
        if (c.clipped) {
          ++clipped;
        } else {
          // d(-ratio * A / n)/d log pi = -ratio * A / n
          weights[t] = -ratio * r.advantage * inv;
        }
      }
      accumulate_logprob_gradient(params, r.seq, weights, out.loss.gradient);
      terms += lp.per_token.size();
    }
    out.loss.value = -objective * inv;
  } else {
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<double> weights;
    for (const auto& r : batch) {
      if (r.behavior_logprobs.size() != r.seq.tokens.size())
        throw std::invalid_argument("behavior log-probs must have one entry per token");
      const auto lp = sequence_logprob(params, r.seq);
      double behavior_total = 0.0;
      for (double b : r.behavior_logprobs) behavior_total += b;
      const double ratio = std::exp(lp.total - behavior_total);
      const auto c = clipped_objective(ratio, r.advantage, cfg.clip_eps);
      objective += c.objective;
      if (c.clipped) {
        ++clipped;
      } else if (!r.seq.tokens.empty()) {
        weights.assign(r.seq.tokens.size(), -ratio * r.advantage * inv);
        accumulate_logprob_gradient(params, r.seq, weights, out.loss.gradient);
      }
      ++terms;
    }
    out.loss.value = -objective * inv;
  }
  out.clip_fraction = terms == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(terms);
  return out;
}

LossTerm kl_penalty(const PolicyParams& params, const PolicyParams& ref, std::span<const Rollout> batch) {
  if (!(params.shape() == ref.shape())) throw std::invalid_argument("reference policy shape mismatch");
  LossTerm out;
  out.gradient.assign(params.size(), 0.0);
  const std::size_t n_tok = token_count(batch);
  if (n_tok == 0) return out;
  const double inv = 1.0 / static_cast<double>(n_tok);
  std::vector<double> weights;
  for (const auto& r : batch) {
    const auto cur = sequence_logprob(params, r.seq);
    const auto base = sequence_logprob(ref, r.seq);
    weights.assign(cur.per_token.size(), 0.0);
    for (std::size_t t = 0; t < cur.per_token.size(); ++t) {
      const double d = base.per_token[t] - cur.per_token[t];
      const double ed = std::exp(d);
      out.value += (ed - d - 1.0) * inv;
      // dk/d log pi_theta = 1 - exp(d)
      weights[t] = (1.0 - ed) * inv;
    }
    accumulate_logprob_gradient(params, r.seq, weights, out.gradient);
  }
  return out;
}

LossTerm entropy_term(const PolicyParams& params, std::span<const Rollout> batch) {
  LossTerm out;
  out.gradient.assign(params.size(), 0.0);
  const std::size_t n_tok = token_count(batch);
  if (n_tok == 0) return out;
  const double inv = 1.0 / static_cast<double>(n_tok);
  for (const auto& r : batch) {
    std::span<const Token> toks(r.seq.tokens);
    for (std::size_t t = 0; t < toks.size(); ++t)
      out.value += row_entropy(params.row(params.context_index(r.seq.condition, toks.first(t)))) * inv;
    accumulate_entropy_gradient(params, r.seq, inv, out.gradient);
  }
  return out;
}

std::optional<StepLoss> total_loss(const PolicyParams& params, const PolicyParams& ref,
                                   std::span<const Rollout> batch, const GrpoConfig& cfg, std::int64_t step) {
  auto surrogate = surrogate_loss(params, batch, cfg);
  if (!surrogate) return std::nullopt;

  StepLoss out;
  out.gradient = std::move(surrogate->loss.gradient);
  out.report.surrogate_loss = surrogate->loss.value;
  out.report.clip_fraction = surrogate->clip_fraction;
  out.report.total_loss = surrogate->loss.value;

  if (cfg.kl_enabled && cfg.kl_coef > 0.0) {
    const auto kl = kl_penalty(params, ref, batch);
    out.report.kl_penalty = kl.value;
    out.report.total_loss += cfg.kl_coef * kl.value;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += cfg.kl_coef * kl.gradient[i];
  }

  const double beta = entropy_coef(cfg.entropy, step);
  const auto ent = entropy_term(params, batch);
  out.report.entropy_bonus = ent.value;
  if (beta > 0.0) {
    out.report.total_loss -= beta * ent.value;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] -= beta * ent.gradient[i];
  }
  out.report.grad_norm_pre_clip = global_norm(out.gradient);
  return out;
}

double global_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double apply_update(PolicyParams& params, std::span<const double> gradient, const GrpoConfig& cfg) {
  if (gradient.size() != params.size()) throw std::invalid_argument("gradient size mismatch");
  const double norm = global_norm(gradient);
  if (!std::isfinite(norm)) throw DivergedError();
  const double scale = norm > cfg.max_grad_norm ? cfg.max_grad_norm / norm : 1.0;
  auto data = params.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] -= cfg.learning_rate * scale * gradient[i];
  return norm;
}

}  // namespace padrl
