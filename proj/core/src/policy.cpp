#include "padrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "padrl/random.hpp"

namespace padrl {

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

// Draws an index from a distribution whose entries sum to ~1.
std::size_t draw(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace

void validate(const PolicyShape& shape) {
  if (shape.vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (shape.max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (shape.context_order < 0 || shape.context_order > 4)
    throw std::invalid_argument("context_order must be in [0, 4]");
  if (shape.num_conditions < 1) throw std::invalid_argument("num_conditions must be >= 1");
  if (shape.eos_token < 0 || shape.eos_token >= shape.vocab_size)
    throw std::invalid_argument("eos_token must be < vocab_size");
}

PolicyParams::PolicyParams(PolicyShape shape) : shape_(shape) {
  validate(shape_);
  contexts_per_condition_ = ipow(static_cast<std::size_t>(shape_.vocab_size) + 1, shape_.context_order);
  num_contexts_ = contexts_per_condition_ * static_cast<std::size_t>(shape_.num_conditions);
  logits_.assign(num_contexts_ * vocab_size(), 0.0);
}

PolicyParams::PolicyParams(PolicyShape shape, std::vector<double> logits) : PolicyParams(shape) {
  if (logits.size() != logits_.size())
    throw std::invalid_argument("logits size " + std::to_string(logits.size()) + " does not match shape (" +
                                std::to_string(logits_.size()) + ")");
  for (double v : logits)
    if (!std::isfinite(v)) throw std::invalid_argument("logits must be finite");
  logits_ = std::move(logits);
}

std::size_t PolicyParams::context_index(std::size_t condition, std::span<const Token> history) const {
  if (condition >= static_cast<std::size_t>(shape_.num_conditions))
    throw std::out_of_range("condition " + std::to_string(condition) + " out of range");
  const std::size_t base = vocab_size() + 1;
  const auto bos = static_cast<std::size_t>(shape_.vocab_size);
  std::size_t idx = 0;
  // Most recent token is the least significant digit.
  for (int j = 0; j < shape_.context_order; ++j) {
    const std::size_t back = static_cast<std::size_t>(j) + 1;
    const std::size_t tok = back <= history.size() ? static_cast<std::size_t>(history[history.size() - back]) : bos;
    idx += tok * ipow(base, j);
  }
  return condition * contexts_per_condition_ + idx;
}

std::span<const double> PolicyParams::row(std::size_t context) const {
  return std::span<const double>(logits_).subspan(context * vocab_size(), vocab_size());
}

std::span<double> PolicyParams::row(std::size_t context) {
  return std::span<double>(logits_).subspan(context * vocab_size(), vocab_size());
}

void validate(const PolicyParams& params, const TokenSequence& seq) {
  const auto& shape = params.shape();
  if (seq.tokens.size() > static_cast<std::size_t>(shape.max_len))
    throw std::invalid_argument("sequence longer than max_len");
  if (seq.condition >= static_cast<std::size_t>(shape.num_conditions))
    throw std::invalid_argument("sequence condition out of range");
  for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
    const Token tok = seq.tokens[t];
    if (tok < 0 || tok >= shape.vocab_size) throw std::invalid_argument("token id out of vocabulary");
    if (tok == shape.eos_token && t + 1 != seq.tokens.size())
      throw std::invalid_argument("EOS must be the final token");
  }
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - m) / temperature);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> sampling_distribution(std::span<const double> logits, const SamplingOptions& options) {
  std::vector<double> probs = softmax(logits, options.temperature);
  if (options.top_p >= 1.0) return probs;

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  // Smallest prefix of the ranking whose mass reaches top_p.
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    mass += probs[order[keep]];
    ++keep;
    if (mass >= options.top_p) break;
  }
  std::vector<double> out(probs.size(), 0.0);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = probs[order[i]] / mass;
  return out;
}

TokenSequence sample_sequence(const PolicyParams& params, const Prompt& prompt, const SamplingOptions& options,
                              std::uint64_t seed) {
  if (!(options.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (!(options.top_p > 0.0 && options.top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");

  Rng rng(seed);
  TokenSequence seq{prompt.id, prompt.condition, {}};
  const auto& shape = params.shape();
  seq.tokens.reserve(static_cast<std::size_t>(shape.max_len));
  while (seq.tokens.size() < static_cast<std::size_t>(shape.max_len)) {
    const auto ctx = params.context_index(prompt.condition, seq.tokens);
    const auto probs = sampling_distribution(params.row(ctx), options);
    const auto tok = static_cast<Token>(draw(probs, rng));
    seq.tokens.push_back(tok);
    if (tok == shape.eos_token) break;
  }
  return seq;
}

TokenSequence greedy_sequence(const PolicyParams& params, const Prompt& prompt) {
  TokenSequence seq{prompt.id, prompt.condition, {}};
  const auto& shape = params.shape();
  while (seq.tokens.size() < static_cast<std::size_t>(shape.max_len)) {
    const auto row = params.row(params.context_index(prompt.condition, seq.tokens));
    // max_element returns the first maximum, i.e. the lowest id on ties.
    const auto tok = static_cast<Token>(std::max_element(row.begin(), row.end()) - row.begin());
    seq.tokens.push_back(tok);
    if (tok == shape.eos_token) break;
  }
  return seq;
}

SequenceLogProb sequence_logprob(const PolicyParams& params, const TokenSequence& seq) {
  SequenceLogProb out;
  out.per_token.reserve(seq.tokens.size());
  std::span<const Token> toks(seq.tokens);
  for (std::size_t t = 0; t < toks.size(); ++t) {
    const auto row = params.row(params.context_index(seq.condition, toks.first(t)));
    const double lp = row[static_cast<std::size_t>(toks[t])] - log_sum_exp(row);
    out.per_token.push_back(lp);
    out.total += lp;
  }
  return out;
}

void accumulate_logprob_gradient(const PolicyParams& params, const TokenSequence& seq,
                                 std::span<const double> weights, std::span<double> grad) {
  if (weights.size() != seq.tokens.size()) throw std::invalid_argument("one weight per token required");
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer has wrong size");
  const std::size_t v = params.vocab_size();
  std::span<const Token> toks(seq.tokens);
  for (std::size_t t = 0; t < toks.size(); ++t) {
    if (weights[t] == 0.0) continue;
    const std::size_t ctx = params.context_index(seq.condition, toks.first(t));
    const auto p = softmax(params.row(ctx));
    double* g = grad.data() + ctx * v;
    for (std::size_t a = 0; a < v; ++a) g[a] -= weights[t] * p[a];
    g[static_cast<std::size_t>(toks[t])] += weights[t];
  }
}

ParamTensor logprob_gradient(const PolicyParams& params, const TokenSequence& seq) {
  ParamTensor grad(params.size(), 0.0);
  const std::vector<double> ones(seq.tokens.size(), 1.0);
  accumulate_logprob_gradient(params, seq, ones, grad);
  return grad;
}

double row_entropy(std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) {
    const double p = std::exp(l);
    if (p > 0.0) h -= p * l;
  }
  return std::max(h, 0.0);
}

double policy_entropy(const PolicyParams& params, std::span<const TokenSequence> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& seq : batch) {
    std::span<const Token> toks(seq.tokens);
    for (std::size_t t = 0; t < toks.size(); ++t) {
      sum += row_entropy(params.row(params.context_index(seq.condition, toks.first(t))));
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

void accumulate_entropy_gradient(const PolicyParams& params, const TokenSequence& seq, double weight,
                                 std::span<double> grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer has wrong size");
  const std::size_t v = params.vocab_size();
  std::span<const Token> toks(seq.tokens);
  for (std::size_t t = 0; t < toks.size(); ++t) {
    const std::size_t ctx = params.context_index(seq.condition, toks.first(t));
    const auto lp = log_softmax(params.row(ctx));
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    // dH/dz_a = -p_a (log p_a + H)
    double* g = grad.data() + ctx * v;
    for (std::size_t a = 0; a < v; ++a) g[a] -= weight * std::exp(lp[a]) * (lp[a] + h);
  }
}

PolicyParams random_policy(const PolicyShape& shape, double scale, std::uint64_t seed) {
  PolicyParams params(shape);
  Rng rng(seed);
  for (double& v : params.data()) v = scale * (2.0 * rng.uniform() - 1.0);
  return params;
}

}  // namespace padrl
