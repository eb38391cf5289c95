#include "padrl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "padrl/config.hpp"
#include "padrl/random.hpp"

namespace padrl {

PolicyShape policy_shape(const ExperimentConfig& cfg) {
  PolicyShape shape{cfg.policy.vocab_size, cfg.policy.max_len, cfg.policy.context_order, 1, kEosToken};
  for (const auto& s : cfg.stages) {
    EnvConfig env = s.env;
    env.vocab_size = cfg.policy.vocab_size;
    env.max_len = cfg.policy.max_len;
    shape.num_conditions = std::max(shape.num_conditions, static_cast<int>(num_conditions(env)));
  }
  return shape;
}

PolicyParams initial_policy(const ExperimentConfig& cfg) {
  return random_policy(policy_shape(cfg), cfg.policy.init_scale, cfg.policy.init_seed);
}

TrainMetrics collect_metrics(const StepRecord& rec, std::string_view stage) {
  TrainMetrics m;
  m.step = rec.step;
  m.stage = std::string(stage);
  m.skipped = !rec.loss.has_value();
  const auto n = static_cast<double>(rec.rollouts.size());
  if (!rec.rollouts.empty()) {
    double correct = 0.0, length = 0.0;
    for (const auto& r : rec.rollouts) {
      correct += r.reward.r_acc;
      length += static_cast<double>(r.seq.length());
    }
    m.reward_accuracy = correct / n;
    m.mean_response_length = length / n;
    m.effective_set_fraction = static_cast<double>(rec.effective_set_size) / n;
  }
  m.entropy = rec.entropy;
  m.tau = rec.tau;
  m.beta = rec.beta;
  if (rec.loss) {
    m.k_prime = static_cast<std::int64_t>(rec.distilled.k_prime);
    m.clip_fraction = rec.loss->clip_fraction;
    m.surrogate_loss = rec.loss->surrogate_loss;
    m.kl_penalty = rec.loss->kl_penalty;
    m.entropy_bonus = rec.loss->entropy_bonus;
    m.total_loss = rec.loss->total_loss;
    m.grad_norm = rec.loss->grad_norm_pre_clip;
  }
  return m;
}

StageRunner::StageRunner(StageConfig cfg, PolicyParams initial, std::uint32_t stage_index, std::uint64_t root_seed)
    : cfg_(std::move(cfg)),
      params_(std::move(initial)),
      reference_(snapshot(params_)),
      stage_index_(stage_index),
      root_seed_(root_seed) {
  const auto problems = violations(cfg_);
  if (!problems.empty()) throw ConfigError(problems);
  if (num_conditions(cfg_.env) > static_cast<std::size_t>(params_.shape().num_conditions) ||
      cfg_.env.max_len != params_.shape().max_len || cfg_.env.vocab_size != params_.shape().vocab_size)
    throw std::invalid_argument("policy shape does not cover the stage environment");
  dataset_ = generate_dataset(cfg_.env);
  config_hash_ = config_hash(cfg_);
}

StageRunner::StageRunner(StageConfig cfg, const Checkpoint& ckpt)
    : StageRunner(std::move(cfg), ckpt.params, ckpt.stage_index, ckpt.root_seed) {
  if (ckpt.config_hash != config_hash_) throw std::invalid_argument("checkpoint was written under a different config");
  if (ckpt.stage != to_string(cfg_.name)) throw std::invalid_argument("checkpoint belongs to another stage");
  reference_ = ckpt.reference;
  step_ = ckpt.step;
}

Checkpoint StageRunner::checkpoint() const {
  return Checkpoint{std::string(to_string(cfg_.name)), stage_index_, step_, root_seed_, config_hash_, params_,
                    reference_};
}

StepRecord StageRunner::step_detailed() {
  if (done()) throw std::logic_error("stage already finished");
  const std::int64_t t = step_;
  const auto st = static_cast<std::uint64_t>(stage_index_);
  const auto tu = static_cast<std::uint64_t>(t);
  StepRecord rec;
  rec.step = t;
  rec.tau = tau_at(cfg_.pad.tau, t);
  rec.beta = entropy_coef(cfg_.grpo.entropy, t);

  const PolicyParams behavior = snapshot(params_);

  // Prompts for this step: without replacement while the dataset allows it.
  std::vector<std::size_t> chosen;
  {
    Rng rng(derive_seed(root_seed_, {st, tu, 0}));
    const std::size_t n = dataset_.size();
    if (cfg_.rollout_batch_prompts <= n) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 0; i < cfg_.rollout_batch_prompts; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(perm[i], perm[j]);
      }
      chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg_.rollout_batch_prompts));
    } else {
      for (std::size_t i = 0; i < cfg_.rollout_batch_prompts; ++i) chosen.push_back(rng.below(n));
    }
  }

  const SamplingOptions gen{cfg_.generation.temperature, cfg_.generation.top_p};
  std::vector<Group> groups;
  groups.reserve(chosen.size());
  std::vector<TokenSequence> sequences;
  for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
    const Prompt& prompt = dataset_[chosen[slot]];
    Group g;
    g.prompt_id = prompt.id;
    for (std::size_t i = 0; i < cfg_.group_size; ++i) {
      Rollout r;
      r.seq = sample_sequence(behavior, prompt, gen, derive_seed(root_seed_, {st, tu, 1, slot, i}));
      r.behavior_logprobs = sequence_logprob(behavior, r.seq).per_token;
      r.reward = total_reward(prompt, r.seq, cfg_.length, cfg_.length_reward_enabled);
      sequences.push_back(r.seq);
      g.rollouts.push_back(std::move(r));
    }
    groups.push_back(std::move(g));
  }
  rec.rollouts = batch_advantages(std::move(groups), cfg_.eps_stability);
  rec.entropy = policy_entropy(behavior, sequences);
  rec.effective_set_size = filter_effective(rec.rollouts, cfg_.pad.t_low, cfg_.pad.t_high).size();
  rec.distilled = select_strategy(cfg_.strategy, rec.rollouts, cfg_.pad, t, derive_seed(root_seed_, {st, tu, 2}));

  if (!rec.distilled.empty()) {
    const std::size_t k = rec.distilled.selected.size();
    const auto parts = static_cast<std::size_t>(cfg_.grpo.minibatches);
    const std::span<const Rollout> all(rec.distilled.selected);
    LossReport sum;
    std::size_t applied = 0;
    for (std::size_t b = 0; b < parts; ++b) {
      const std::size_t lo = k * b / parts, hi = k * (b + 1) / parts;
      if (lo == hi) continue;
      auto loss = total_loss(params_, reference_, all.subspan(lo, hi - lo), cfg_.grpo, t);
      if (!loss) continue;
      if (!std::isfinite(loss->report.total_loss) || !std::isfinite(loss->report.grad_norm_pre_clip))
        throw TrainingDiverged("non-finite loss at " + std::string(to_string(cfg_.name)) + " step " + std::to_string(t),
                               checkpoint());
      apply_update(params_, loss->gradient, cfg_.grpo);
      sum.surrogate_loss += loss->report.surrogate_loss;
      sum.kl_penalty += loss->report.kl_penalty;
      sum.entropy_bonus += loss->report.entropy_bonus;
      sum.total_loss += loss->report.total_loss;
      sum.clip_fraction += loss->report.clip_fraction;
      sum.grad_norm_pre_clip += loss->report.grad_norm_pre_clip;
      ++applied;
    }
    if (applied > 0) {
      const double inv = 1.0 / static_cast<double>(applied);
      sum.surrogate_loss *= inv;
      sum.kl_penalty *= inv;
      sum.entropy_bonus *= inv;
      sum.total_loss *= inv;
      sum.clip_fraction *= inv;
      sum.grad_norm_pre_clip *= inv;
      rec.loss = sum;
    }
  }
  ++step_;
  return rec;
}

TrainMetrics StageRunner::step() { return collect_metrics(step_detailed(), to_string(cfg_.name)); }

StageResult run_stage(const PolicyParams& initial, const StageConfig& cfg, std::uint32_t stage_index,
                      std::uint64_t root_seed, const MetricsSink& sink) {
  StageRunner runner(cfg, initial, stage_index, root_seed);
  StageResult out;
  out.metrics.reserve(static_cast<std::size_t>(cfg.steps));
  while (!runner.done()) {
    out.metrics.push_back(runner.step());
    if (sink) sink(out.metrics.back());
  }
  out.params = runner.params();
  out.final_checkpoint = runner.checkpoint();
  return out;
}

std::string stage_file_stem(std::uint32_t stage_index, StageName name) {
  return "stage" + std::to_string(stage_index) + "_" + std::string(to_string(name));
}

CurriculumResult run_curriculum(const ExperimentConfig& cfg, const PolicyParams& initial,
                                const std::optional<std::filesystem::path>& out_dir) {
  if (cfg.stages.empty()) throw std::invalid_argument("curriculum needs at least one stage");
  if (out_dir) std::filesystem::create_directories(*out_dir);
  CurriculumResult out;
  PolicyParams current = initial;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto idx = static_cast<std::uint32_t>(i);
    const auto& stage = cfg.stages[i];
    StageResult res;
    try {
      res = run_stage(current, stage, idx, cfg.seed);
    } catch (const TrainingDiverged& e) {
      if (out_dir) {
        const auto path = *out_dir / (stage_file_stem(idx, stage.name) + "_diverged.ckpt");
        save_checkpoint(path, e.checkpoint);
      }
      throw;
    }
    if (out_dir) {
      const auto stem = stage_file_stem(idx, stage.name);
      const auto csv = *out_dir / (stem + ".csv");
      std::ofstream f(csv, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot write " + csv.string());
      write_metrics_csv(f, res.metrics);
      const auto ckpt = *out_dir / (stem + ".ckpt");
      save_checkpoint(ckpt, res.final_checkpoint);
      out.artifacts.push_back(csv);
      out.artifacts.push_back(ckpt);
    }
    current = res.params;
    out.stages.push_back(std::move(res));
  }
  out.params = std::move(current);
  return out;
}

namespace {

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double terminal_accuracy(std::span<const TrainMetrics> curve) {
  if (curve.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, curve.size() / 10);
  double s = 0.0;
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) s += curve[i].reward_accuracy;
  return s / static_cast<double>(tail);
}

double accuracy_auc(std::span<const TrainMetrics> curve) {
  if (curve.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : curve) s += m.reward_accuracy;
  return s / static_cast<double>(curve.size());
}

AblationResult run_ablation(const StageConfig& base, const PolicyParams& initial, std::span<const Strategy> strategies,
                            std::span<const std::uint64_t> seeds, unsigned threads) {
  if (strategies.size() < 2) throw std::invalid_argument("an ablation needs at least two strategies");
  if (seeds.empty()) throw std::invalid_argument("an ablation needs at least one seed");
  AblationResult out;
  out.strategies.assign(strategies.begin(), strategies.end());
  out.seeds.assign(seeds.begin(), seeds.end());
  out.curves.assign(strategies.size(), std::vector<std::vector<TrainMetrics>>(seeds.size()));

  const std::size_t jobs = strategies.size() * seeds.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t si = job / seeds.size(), ki = job % seeds.size();
      try {
        StageConfig cfg = base;
        cfg.strategy = strategies[si];
        out.curves[si][ki] = run_stage(initial, cfg, 0, seeds[ki]).metrics;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t si = 0; si < strategies.size(); ++si) {
    AblationSummaryRow row;
    row.strategy = strategies[si];
    row.n_seeds = seeds.size();
    for (const auto& curve : out.curves[si]) {
      row.terminal_accuracy.push_back(terminal_accuracy(curve));
      row.auc.push_back(accuracy_auc(curve));
    }
    row.terminal_accuracy_mean = mean_of(row.terminal_accuracy);
    row.terminal_accuracy_std = std_of(row.terminal_accuracy);
    row.auc_mean = mean_of(row.auc);
    row.auc_std = std_of(row.auc);
    out.summary.push_back(std::move(row));
  }
  return out;
}

}  // namespace padrl
