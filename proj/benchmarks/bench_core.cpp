#include <benchmark/benchmark.h>

#include <random>

#include "padrl/advantage.hpp"
#include "padrl/grpo.hpp"
#include "padrl/pad.hpp"
#include "padrl/policy.hpp"

using namespace padrl;

namespace {

std::vector<Rollout> random_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> a(0.0, 1.0);
  std::vector<Rollout> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].seq.prompt_id = i;
    out[i].advantage = (i % 3 == 0) ? 0.0 : a(rng);
  }
  return out;
}

const PolicyShape kShape{12, 16, 1, 4, 10};

std::vector<Rollout> sampled_batch(const PolicyParams& params, std::size_t n) {
  std::vector<Rollout> out;
  for (std::size_t i = 0; i < n; ++i) {
    Prompt p;
    p.id = i;
    p.condition = i % 4;
    Rollout r;
    r.seq = sample_sequence(params, p, {1.0, 1.0}, i);
    r.behavior_logprobs = sequence_logprob(params, r.seq).per_token;
    r.advantage = (i % 2 ? 1.0 : -1.0) * 0.7;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

static void BM_Distill(benchmark::State& state) {
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 1);
  PadConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(distill(batch, cfg, 100, seed++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Distill)->Arg(128)->Arg(1024)->Arg(8192);

static void BM_BatchAdvantages(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  std::vector<Group> groups(64);
  std::mt19937_64 rng(2);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    groups[k].prompt_id = k;
    groups[k].rollouts.resize(g);
    for (auto& r : groups[k].rollouts) {
      r.seq.prompt_id = k;
      r.reward.r_total = static_cast<double>(rng() & 1);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(batch_advantages(groups));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(64 * g));
}
BENCHMARK(BM_BatchAdvantages)->Arg(8)->Arg(16);

static void BM_SampleSequence(benchmark::State& state) {
  const auto params = random_policy(kShape, 1.0, 3);
  Prompt p;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_sequence(params, p, {1.0, 0.95}, seed++));
}
BENCHMARK(BM_SampleSequence);

static void BM_SurrogateLoss(benchmark::State& state) {
  const auto params = random_policy(kShape, 1.0, 4);
  const auto batch = sampled_batch(params, static_cast<std::size_t>(state.range(0)));
  GrpoConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(surrogate_loss(params, batch, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SurrogateLoss)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
