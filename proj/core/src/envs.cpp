#include "padrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "padrl/random.hpp"

namespace padrl {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::digit_sum: return "digit_sum";
    case TaskKind::parity_echo: return "parity_echo";
    case TaskKind::padding_exploit: return "padding_exploit";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "digit_sum") return TaskKind::digit_sum;
  if (name == "parity_echo") return TaskKind::parity_echo;
  if (name == "padding_exploit") return TaskKind::padding_exploit;
  throw std::invalid_argument("unknown task_kind '" + std::string(name) +
                              "' (expected digit_sum, parity_echo or padding_exploit)");
}

std::vector<std::string> violations(const EnvConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.vocab_size < kMinVocab) out.emplace_back("vocab_size must be >= 11 (10 digits + EOS)");
  if (cfg.max_len < 1) out.emplace_back("max_len must be >= 1");
  if (cfg.dataset_size < 1) out.emplace_back("dataset_size must be >= 1");
  if (!(cfg.difficulty_lo >= 0.0 && cfg.difficulty_hi <= 1.0 && cfg.difficulty_lo <= cfg.difficulty_hi))
    out.emplace_back("difficulty range must satisfy 0 <= lo <= hi <= 1");
  return out;
}

void validate(const EnvConfig& cfg) {
  const auto errs = violations(cfg);
  if (errs.empty()) return;
  std::string msg = "invalid env config:";
  for (const auto& e : errs) msg += " " + e + ";";
  throw std::invalid_argument(msg);
}

namespace {

int max_parity_bits(int max_len) { return std::max(1, std::min(kMaxParityBits, max_len)); }

}  // namespace

std::size_t num_conditions(const EnvConfig& cfg) {
  switch (cfg.task) {
    case TaskKind::digit_sum: return static_cast<std::size_t>(9 * cfg.max_len) + 1;
    case TaskKind::parity_echo: return std::size_t{1} << (max_parity_bits(cfg.max_len) + 1);
    case TaskKind::padding_exploit: return 1;
  }
  return 1;
}

std::size_t condition_for(TaskKind task, std::span<const int> spec) {
  switch (task) {
    case TaskKind::digit_sum:
      if (spec.size() != 1 || spec[0] < 0) throw std::invalid_argument("digit_sum spec must be {target >= 0}");
      return static_cast<std::size_t>(spec[0]);
    case TaskKind::parity_echo: {
      if (spec.empty() || spec.size() > static_cast<std::size_t>(kMaxParityBits))
        throw std::invalid_argument("parity_echo spec must hold 1..6 bits");
      std::size_t code = std::size_t{1} << spec.size();
      for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i] != 0 && spec[i] != 1) throw std::invalid_argument("parity_echo spec bits must be 0 or 1");
        code |= static_cast<std::size_t>(spec[i]) << i;
      }
      return code;
    }
    case TaskKind::padding_exploit:
      if (spec.size() != 1 || spec[0] < 0 || spec[0] >= kNumDigits)
        throw std::invalid_argument("padding_exploit spec must be {answer digit}");
      // The policy is deliberately blind to the answer.
      return 0;
  }
  return 0;
}

PolicyShape policy_shape_for(const EnvConfig& cfg, int context_order) {
  return PolicyShape{cfg.vocab_size, cfg.max_len, context_order, static_cast<int>(num_conditions(cfg)), kEosToken};
}

std::vector<double> digit_sum_uniform_solve_rates(int vocab_size, int max_len) {
  const auto max_sum = static_cast<std::size_t>(9 * max_len);
  const double p = 1.0 / vocab_size;
  const double p_filler = static_cast<double>(vocab_size - kMinVocab) * p;
  std::vector<double> alive(max_sum + 1, 0.0), done(max_sum + 1, 0.0), next(max_sum + 1);
  alive[0] = 1.0;
  for (int t = 0; t < max_len; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s <= max_sum; ++s) {
      if (alive[s] == 0.0) continue;
      done[s] += alive[s] * p;
      next[s] += alive[s] * p_filler;
      for (std::size_t d = 0; d < 10 && s + d <= max_sum; ++d) next[s + d] += alive[s] * p;
    }
    std::swap(alive, next);
  }
  for (std::size_t s = 0; s <= max_sum; ++s) done[s] += alive[s];
  return done;
}

std::vector<int> digit_sum_targets_by_difficulty(int vocab_size, int max_len) {
  const auto rates = digit_sum_uniform_solve_rates(vocab_size, max_len);
  // Target 0 is excluded: an empty answer would solve it.
  std::vector<int> targets(rates.size() - 1);
  std::iota(targets.begin(), targets.end(), 1);
  std::stable_sort(targets.begin(), targets.end(),
                   [&](int a, int b) { return rates[static_cast<std::size_t>(a)] > rates[static_cast<std::size_t>(b)]; });
  return targets;
}

int parity_echo_bits(double difficulty, int max_len) {
  const int hi = max_parity_bits(max_len);
  return 1 + static_cast<int>(std::lround(difficulty * (hi - 1)));
}

std::vector<Prompt> generate_dataset(const EnvConfig& cfg) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.task)}));
  std::vector<int> targets;
  if (cfg.task == TaskKind::digit_sum) targets = digit_sum_targets_by_difficulty(cfg.vocab_size, cfg.max_len);

  std::vector<Prompt> out;
  out.reserve(cfg.dataset_size);
  const double n = static_cast<double>(cfg.dataset_size);
  for (std::size_t i = 0; i < cfg.dataset_size; ++i) {
    const double u = (static_cast<double>(i) + rng.uniform()) / n;
    const double d = std::clamp(cfg.difficulty_lo + (cfg.difficulty_hi - cfg.difficulty_lo) * u, cfg.difficulty_lo,
                                cfg.difficulty_hi);
    Prompt p;
    p.id = i;
    p.task = cfg.task;
    p.difficulty = d;
    switch (cfg.task) {
      case TaskKind::digit_sum: {
        const auto rank = static_cast<std::size_t>(std::lround(d * static_cast<double>(targets.size() - 1)));
        p.spec = {targets[rank]};
        break;
      }
      case TaskKind::parity_echo: {
        const int bits = parity_echo_bits(d, cfg.max_len);
        for (int b = 0; b < bits; ++b) p.spec.push_back(static_cast<int>(rng.below(2)));
        break;
      }
      case TaskKind::padding_exploit:
        p.spec = {static_cast<int>(rng.below(kNumDigits))};
        break;
    }
    p.condition = condition_for(p.task, p.spec);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// Response body: tokens before EOS.
std::span<const Token> body(const TokenSequence& seq) {
  std::span<const Token> toks(seq.tokens);
  if (!toks.empty() && toks.back() == kEosToken) toks = toks.first(toks.size() - 1);
  return toks;
}

}  // namespace

int verify(const Prompt& prompt, const TokenSequence& seq) {
  if (seq.prompt_id != prompt.id || seq.condition != prompt.condition)
    throw std::invalid_argument("prompt/sequence environment mismatch");
  for (Token t : seq.tokens)
    if (t < 0) throw std::invalid_argument("prompt/sequence environment mismatch: negative token id");

  const auto resp = body(seq);
  switch (prompt.task) {
    case TaskKind::digit_sum: {
      int sum = 0;
      for (Token t : resp)
        if (t < kNumDigits) sum += t;
      return sum == prompt.spec.at(0) ? 1 : 0;
    }
    case TaskKind::parity_echo: {
      if (resp.size() != prompt.spec.size()) return 0;
      for (std::size_t i = 0; i < resp.size(); ++i) {
        if (resp[i] >= kNumDigits || resp[i] % 2 != prompt.spec[i]) return 0;
      }
      return 1;
    }
    case TaskKind::padding_exploit: {
      const Token answer = prompt.spec.at(0);
      return std::find(resp.begin(), resp.end(), answer) != resp.end() ? 1 : 0;
    }
  }
  return 0;
}

double stagnation_probe(const EnvConfig& cfg, const PolicyParams& params, std::size_t group_size,
                        std::size_t n_groups, std::uint64_t seed) {
  return stagnation_probe(cfg, params, group_size, n_groups, seed,
                          [](const Prompt& p, const TokenSequence& s, std::size_t) { return verify(p, s); });
}

double stagnation_probe(const EnvConfig& cfg, const PolicyParams& params, std::size_t group_size,
                        std::size_t n_groups, std::uint64_t seed, const Verifier& verifier) {
  if (group_size < 2) throw std::invalid_argument("stagnation_probe requires G >= 2");
  if (n_groups == 0) throw std::invalid_argument("stagnation_probe requires n_groups >= 1");
  const auto dataset = generate_dataset(cfg);
  Rng pick(derive_seed(seed, {0}));
  const SamplingOptions plain{1.0, 1.0};
  std::size_t uniform = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const Prompt& prompt = dataset[pick.below(dataset.size())];
    int first = -1;
    bool mixed = false;
    for (std::size_t i = 0; i < group_size; ++i) {
      const auto seq = sample_sequence(params, prompt, plain, derive_seed(seed, {1, g, i}));
      const int r = verifier(prompt, seq, i);
      if (first < 0) {
        first = r;
      } else if (r != first) {
        mixed = true;
        break;
      }
    }
    if (!mixed) ++uniform;
  }
  return static_cast<double>(uniform) / static_cast<double>(n_groups);
}

void write_dataset(std::ostream& out, std::span<const Prompt> prompts) {
  for (const auto& p : prompts) {
    nlohmann::json j;
    j["prompt_id"] = p.id;
    j["task_kind"] = std::string(to_string(p.task));
    j["spec"] = p.spec;
    j["difficulty"] = p.difficulty;
    out << j.dump() << '\n';
  }
}

std::vector<Prompt> read_dataset(std::istream& in) {
  std::vector<Prompt> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prompt p;
      p.id = j.at("prompt_id").get<std::uint64_t>();
      p.task = parse_task_kind(j.at("task_kind").get<std::string>());
      p.spec = j.at("spec").get<std::vector<int>>();
      p.difficulty = j.at("difficulty").get<double>();
      p.condition = condition_for(p.task, p.spec);
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace padrl
