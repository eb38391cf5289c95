#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "padrl/advantage.hpp"
#include "padrl/envs.hpp"
#include "padrl/grpo.hpp"
#include "padrl/metrics.hpp"
#include "padrl/pad.hpp"
#include "padrl/policy.hpp"
#include "padrl/rewards.hpp"

namespace padrl {

enum class StageName { mrl_analog, trl_analog };

std::string_view to_string(StageName name);
StageName parse_stage_name(std::string_view name);

struct GenerationConfig {
  double temperature = 1.0;
  double top_p = 0.95;

  bool operator==(const GenerationConfig&) const = default;
};

struct StageConfig {
  StageName name = StageName::mrl_analog;
  EnvConfig env;
  std::int64_t steps = 200;
  std::size_t group_size = 8;
  std::size_t rollout_batch_prompts = 16;
  Strategy strategy = Strategy::pad;
  PadConfig pad;
  GrpoConfig grpo;
  LengthRewardConfig length;
  bool length_reward_enabled = false;
  GenerationConfig generation;
  double eps_stability = kDefaultEpsStability;
};

/// Policy-table initialisation shared by every stage of a run.
struct PolicyInit {
  int vocab_size = 12;
  int max_len = 8;
  int context_order = 1;
  double init_scale = 0.0;
  std::uint64_t init_seed = 0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  PolicyInit policy;
  std::vector<StageConfig> stages;
};

/// Shape covering every stage's environment.
PolicyShape policy_shape(const ExperimentConfig& cfg);
PolicyParams initial_policy(const ExperimentConfig& cfg);

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string stage;
  std::uint32_t stage_index = 0;
  std::int64_t step = 0;  // next step to run
  std::uint64_t root_seed = 0;
  std::uint64_t config_hash = 0;
  PolicyParams params;
  PolicyParams reference;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Thrown when the loss or gradient stops being finite; carries the state
/// from just before the failing update.
class TrainingDiverged : public std::runtime_error {
public:
  TrainingDiverged(const std::string& what, Checkpoint state)
      : std::runtime_error(what), checkpoint(std::move(state)) {}
  Checkpoint checkpoint;
};

using MetricsSink = std::function<void(const TrainMetrics&)>;

/// Everything one step produced, before it is reduced to TrainMetrics.
struct StepRecord {
  std::int64_t step = 0;
  std::vector<Rollout> rollouts;
  std::size_t effective_set_size = 0;
  DistilledBatch distilled;
  std::optional<LossReport> loss;  // nullopt on a skipped step
  double entropy = 0.0;
  double tau = 0.0;
  double beta = 0.0;
};

TrainMetrics collect_metrics(const StepRecord& record, std::string_view stage);

// Drives one stage step by step. Randomness for step t is derived from
// (root_seed, stage_index, t) only, so a runner resumed from a checkpoint
// continues exactly where the original left off.
class StageRunner {
public:
  StageRunner(StageConfig cfg, PolicyParams initial, std::uint32_t stage_index, std::uint64_t root_seed);
  /// Throws std::invalid_argument if the checkpoint was taken under another config.
  StageRunner(StageConfig cfg, const Checkpoint& resume_from);

  bool done() const noexcept { return step_ >= cfg_.steps; }
  std::int64_t next_step() const noexcept { return step_; }
  const PolicyParams& params() const noexcept { return params_; }
  const PolicyParams& reference() const noexcept { return reference_; }
  const StageConfig& config() const noexcept { return cfg_; }
  const std::vector<Prompt>& dataset() const noexcept { return dataset_; }

  TrainMetrics step();
  StepRecord step_detailed();
  Checkpoint checkpoint() const;

private:
  StageConfig cfg_;
  std::vector<Prompt> dataset_;
  PolicyParams params_;
  PolicyParams reference_;
  std::uint32_t stage_index_ = 0;
  std::uint64_t root_seed_ = 0;
  std::uint64_t config_hash_ = 0;
  std::int64_t step_ = 0;
};

struct StageResult {
  PolicyParams params;
  std::vector<TrainMetrics> metrics;
  Checkpoint final_checkpoint;
};

StageResult run_stage(const PolicyParams& initial, const StageConfig& cfg, std::uint32_t stage_index,
                      std::uint64_t root_seed, const MetricsSink& sink = {});

struct CurriculumResult {
  PolicyParams params;
  std::vector<StageResult> stages;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs stages in order, feeding each stage's final policy to the next. When
/// `out_dir` is given, writes stage<i>_<name>.csv and stage<i>_<name>.ckpt there.
CurriculumResult run_curriculum(const ExperimentConfig& cfg, const PolicyParams& initial,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string stage_file_stem(std::uint32_t stage_index, StageName name);

struct AblationSummaryRow {
  Strategy strategy = Strategy::pad;
  std::size_t n_seeds = 0;
  double terminal_accuracy_mean = 0.0;
  double terminal_accuracy_std = 0.0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::vector<double> terminal_accuracy;  // per seed
  std::vector<double> auc;                // per seed
};

struct AblationResult {
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<std::vector<TrainMetrics>>> curves;  // [strategy][seed][step]
  std::vector<AblationSummaryRow> summary;
};

/// Mean reward accuracy over the final 10% of steps (at least one step).
double terminal_accuracy(std::span<const TrainMetrics> curve);
/// Mean reward accuracy over all steps: area under the accuracy curve
/// normalised by its length.
double accuracy_auc(std::span<const TrainMetrics> curve);

/// Runs every (strategy, seed) pair from the same initial policy. `threads` = 0
/// uses the hardware concurrency.
AblationResult run_ablation(const StageConfig& base, const PolicyParams& initial, std::span<const Strategy> strategies,
                            std::span<const std::uint64_t> seeds, unsigned threads = 0);

}  // namespace padrl
