#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "padrl/policy.hpp"
#include "padrl/prompt.hpp"

namespace padrl {

// Token layout shared by every task: ids 0-9 are digits, 10 is EOS, anything
// above is a non-digit filler token.
inline constexpr Token kNumDigits = 10;
inline constexpr Token kEosToken = 10;
inline constexpr int kMinVocab = 11;
inline constexpr int kMaxParityBits = 6;

struct EnvConfig {
  TaskKind task = TaskKind::digit_sum;
  int vocab_size = 12;
  int max_len = 8;
  double difficulty_lo = 0.0;
  double difficulty_hi = 1.0;
  std::size_t dataset_size = 64;
  std::uint64_t seed = 0;
};

/// Every violated constraint, one message each. Empty when valid.
std::vector<std::string> violations(const EnvConfig& cfg);
/// Throws std::invalid_argument listing all violations.
void validate(const EnvConfig& cfg);

/// Number of distinct policy conditions a task can emit.
std::size_t num_conditions(const EnvConfig& cfg);
/// Policy condition for a task instance; pure in (task, spec).
std::size_t condition_for(TaskKind task, std::span<const int> spec);
/// Policy shape able to serve `cfg`.
PolicyShape policy_shape_for(const EnvConfig& cfg, int context_order);

/// Exact probability, indexed by target, that the uniform policy's response
/// digits sum to that target (digit_sum task).
std::vector<double> digit_sum_uniform_solve_rates(int vocab_size, int max_len);
/// digit_sum targets ordered from easiest to hardest under the uniform
/// policy; difficulty d selects rank round(d * (n - 1)).
std::vector<int> digit_sum_targets_by_difficulty(int vocab_size, int max_len);
/// Number of answer digits a parity_echo prompt of difficulty d asks for.
int parity_echo_bits(double difficulty, int max_len);

/// Deterministic in cfg.seed; difficulties stratified over the range.
std::vector<Prompt> generate_dataset(const EnvConfig& cfg);

/// Rule-based binary reward: 1 iff the response solves the prompt.
int verify(const Prompt& prompt, const TokenSequence& seq);

using Verifier = std::function<int(const Prompt&, const TokenSequence&, std::size_t rollout_index)>;

/// Monte-Carlo estimate of the fraction of G-rollout groups whose rewards are
/// all equal. Samples at temperature 1 without truncation.
double stagnation_probe(const EnvConfig& cfg, const PolicyParams& params, std::size_t group_size,
                        std::size_t n_groups, std::uint64_t seed);
double stagnation_probe(const EnvConfig& cfg, const PolicyParams& params, std::size_t group_size,
                        std::size_t n_groups, std::uint64_t seed, const Verifier& verifier);

/// One JSON object per line: prompt_id, task_kind, spec, difficulty.
void write_dataset(std::ostream& out, std::span<const Prompt> prompts);
std::vector<Prompt> read_dataset(std::istream& in);

}  // namespace padrl
