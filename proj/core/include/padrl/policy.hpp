#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "padrl/prompt.hpp"

namespace padrl {

struct PolicyShape {
  int vocab_size = 12;
  int max_len = 16;
  int context_order = 1;
  int num_conditions = 1;
  Token eos_token = 10;

  bool operator==(const PolicyShape&) const = default;
};

/// Throws std::invalid_argument describing the first violated constraint.
void validate(const PolicyShape& shape);

// Logits table of an order-k autoregressive softmax policy. A context is the
// prompt condition together with the previous `context_order` tokens, where
// positions before the start of the response read as a BOS symbol
// (id == vocab_size).
class PolicyParams {
public:
  PolicyParams() = default;
  explicit PolicyParams(PolicyShape shape);
  PolicyParams(PolicyShape shape, std::vector<double> logits);

  const PolicyShape& shape() const noexcept { return shape_; }
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(shape_.vocab_size); }
  std::size_t num_contexts() const noexcept { return num_contexts_; }
  std::size_t size() const noexcept { return logits_.size(); }

  /// Context row for `condition` given the full response prefix `history`.
  std::size_t context_index(std::size_t condition, std::span<const Token> history) const;

  std::span<const double> row(std::size_t context) const;
  std::span<double> row(std::size_t context);

  std::span<const double> data() const noexcept { return logits_; }
  std::span<double> data() noexcept { return logits_; }

  bool operator==(const PolicyParams&) const = default;

private:
  PolicyShape shape_{};
  std::size_t contexts_per_condition_ = 0;
  std::size_t num_contexts_ = 0;
  std::vector<double> logits_;
};

/// Gradient or update tensor laid out exactly like PolicyParams::data().
using ParamTensor = std::vector<double>;

struct TokenSequence {
  std::uint64_t prompt_id = 0;
  std::size_t condition = 0;
  std::vector<Token> tokens;

  /// L_y: response token count, EOS included.
  std::size_t length() const noexcept { return tokens.size(); }

  bool operator==(const TokenSequence&) const = default;
};

/// Throws std::invalid_argument if the sequence cannot have come from `params`.
void validate(const PolicyParams& params, const TokenSequence& seq);

struct SamplingOptions {
  double temperature = 1.0;
  double top_p = 1.0;
};

/// Numerically stable softmax of `logits / temperature`.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);
std::vector<double> log_softmax(std::span<const double> logits);

/// Temperature-scaled, nucleus-truncated next-token distribution. Tokens
/// outside the nucleus get probability 0; ties in the ranking keep the lower id
/// first.
std::vector<double> sampling_distribution(std::span<const double> logits, const SamplingOptions& options);

/// Samples until EOS or max_len. Reproducible for a given seed.
TokenSequence sample_sequence(const PolicyParams& params, const Prompt& prompt, const SamplingOptions& options,
                              std::uint64_t seed);

/// Zero-temperature decode; ties go to the lowest token id.
TokenSequence greedy_sequence(const PolicyParams& params, const Prompt& prompt);

struct SequenceLogProb {
  double total = 0.0;
  std::vector<double> per_token;
};

/// Log-probabilities under the untruncated temperature-1 softmax.
SequenceLogProb sequence_logprob(const PolicyParams& params, const TokenSequence& seq);

/// d(total log-prob)/d(logits).
ParamTensor logprob_gradient(const PolicyParams& params, const TokenSequence& seq);

/// grad += sum_t weights[t] * d(log pi(token_t))/d(logits). `weights` has one
/// entry per token of `seq`.
void accumulate_logprob_gradient(const PolicyParams& params, const TokenSequence& seq,
                                 std::span<const double> weights, std::span<double> grad);

/// Mean per-token Shannon entropy (nats) of the next-token distribution at
/// every context visited by `batch`. Throws on an empty batch.
double policy_entropy(const PolicyParams& params, std::span<const TokenSequence> batch);

/// Entropy of one softmax row.
double row_entropy(std::span<const double> logits);

/// grad += weight * d(H(row at each visited position))/d(logits), summed over
/// positions of `seq`.
void accumulate_entropy_gradient(const PolicyParams& params, const TokenSequence& seq, double weight,
                                 std::span<double> grad);

/// Logits drawn i.i.d. uniform in [-scale, scale]; scale 0 gives the uniform policy.
PolicyParams random_policy(const PolicyShape& shape, double scale, std::uint64_t seed);

/// Deep copy used for behavior and reference policies.
inline PolicyParams snapshot(const PolicyParams& params) { return params; }

}  // namespace padrl
