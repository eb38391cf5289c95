#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "padrl/grpo.hpp"

using namespace padrl;

namespace {

struct Instance {
  PolicyParams params;
  PolicyParams behavior;
  std::vector<Rollout> batch;
};

// Current policy = behavior + noise, so ratios straddle the clip range.
Instance random_instance(std::mt19937_64& rng, std::size_t n_rollouts, double drift) {
  const PolicyShape shape{5, 5, 1, 2, 4};
  Instance in{PolicyParams(shape), oracle::random_params(shape, 1.5, rng), {}};
  std::normal_distribution<double> noise(0.0, drift), adv(0.0, 1.0);
  in.params = in.behavior;
  for (double& v : in.params.data()) v += noise(rng);
  for (std::size_t i = 0; i < n_rollouts; ++i) {
    Rollout r;
    r.seq = oracle::random_sequence(shape, i % 2, rng);
    r.behavior_logprobs = oracle::token_logprobs(in.behavior, r.seq);
    r.advantage = adv(rng);
    in.batch.push_back(std::move(r));
  }
  return in;
}

double min_distance_to_clip_edges(const Instance& in, const GrpoConfig& cfg) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& r : in.batch) {
    const auto lp = oracle::token_logprobs(in.params, r.seq);
    double total = 0.0, btotal = 0.0;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      total += lp[t];
      btotal += r.behavior_logprobs[t];
      const double ratio = std::exp(lp[t] - r.behavior_logprobs[t]);
      if (cfg.ratio_level == RatioLevel::token)
        d = std::min({d, std::abs(ratio - 1 + cfg.clip_eps), std::abs(ratio - 1 - cfg.clip_eps)});
    }
    const double ratio = std::exp(total - btotal);
    if (cfg.ratio_level == RatioLevel::sequence)
      d = std::min({d, std::abs(ratio - 1 + cfg.clip_eps), std::abs(ratio - 1 - cfg.clip_eps)});
  }
  return d;
}

// Token-level clipped objective, written out directly.
double oracle_token_objective(const PolicyParams& p, const std::vector<Rollout>& batch, double eps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : batch) {
    const auto lp = oracle::token_logprobs(p, r.seq);
    for (std::size_t t = 0; t < lp.size(); ++t, ++n)
      sum += oracle::clipped_objective(std::exp(lp[t] - r.behavior_logprobs[t]), r.advantage, eps);
  }
  return sum / static_cast<double>(n);
}

Rollout single_token(const PolicyParams& p, double ratio, double advantage) {
  Rollout r;
  r.seq = TokenSequence{0, 0, {1}};
  r.behavior_logprobs = {oracle::token_logprobs(p, r.seq)[0] - std::log(ratio)};
  r.advantage = advantage;
  return r;
}

}  // namespace

TEST_SUITE("grpo") {
  TEST_CASE("entropy coefficient schedule") {
    const EntropySchedule s;
    CHECK(entropy_coef(s, 0) == 0.02);
    CHECK(entropy_coef(s, 139) == 0.02);
    CHECK(entropy_coef(s, 140) == 0.02);
    CHECK(entropy_coef(s, 240) == doctest::Approx(0.02 * std::pow(0.985, 100)).epsilon(1e-14));
    CHECK(entropy_coef(s, 240) == doctest::Approx(0.00443).epsilon(1e-3));
    double prev = 1.0;
    for (std::int64_t t = 0; t < 2000; ++t) {
      const double b = entropy_coef(s, t);
      CHECK_UNARY(b <= prev);
      CHECK_UNARY(b >= s.beta_min);
      CHECK_UNARY(b <= s.beta0);
      prev = b;
    }
    EntropySchedule floored = s;
    floored.beta_min = 0.005;
    CHECK(entropy_coef(floored, 1000) == 0.005);
    CHECK_THROWS(entropy_coef(s, -1));
  }

  TEST_CASE("single-token clipping examples") {
    const PolicyParams p(PolicyShape{3, 2, 1, 1, 2});
    GrpoConfig cfg;
    cfg.clip_eps = 0.2;

    const std::vector<Rollout> up{single_token(p, 1.5, 1.0)};
    const auto a = surrogate_loss(p, up, cfg);
    REQUIRE(a);
    CHECK(a->loss.value == doctest::Approx(-1.2).epsilon(1e-12));
    CHECK(a->clip_fraction == 1.0);
    for (double g : a->loss.gradient) CHECK(g == 0.0);

    const std::vector<Rollout> down{single_token(p, 0.5, -1.0)};
    const auto b = surrogate_loss(p, down, cfg);
    CHECK(b->loss.value == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(b->clip_fraction == 1.0);

    // Ratio outside the range but on the unclipped side of the min.
    const std::vector<Rollout> keep{single_token(p, 0.5, 1.0)};
    const auto c = surrogate_loss(p, keep, cfg);
    CHECK(c->loss.value == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(c->clip_fraction == 0.0);
  }

  TEST_CASE("at the behavior policy the objective is the mean advantage") {
    std::mt19937_64 rng(1);
    auto in = random_instance(rng, 6, 0.0);
    for (auto level : {RatioLevel::token, RatioLevel::sequence}) {
      GrpoConfig cfg;
      cfg.ratio_level = level;
      const auto s = surrogate_loss(in.behavior, in.batch, cfg);
      double num = 0.0, den = 0.0;
      for (const auto& r : in.batch) {
        const double w = level == RatioLevel::token ? static_cast<double>(r.seq.length()) : 1.0;
        num += w * r.advantage;
        den += w;
      }
      CHECK(s->loss.value == doctest::Approx(-num / den).epsilon(1e-12));
      CHECK(s->clip_fraction == 0.0);
    }
  }

  TEST_CASE("zero advantages give an exactly zero gradient") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      auto in = random_instance(rng, 8, 0.3);
      for (auto& r : in.batch) r.advantage = 0.0;
      for (auto level : {RatioLevel::token, RatioLevel::sequence}) {
        GrpoConfig cfg;
        cfg.ratio_level = level;
        const auto s = surrogate_loss(in.params, in.batch, cfg);
        for (double g : s->loss.gradient) CHECK(g == 0.0);
      }
    }
  }

  TEST_CASE("ratios inside the trust region reproduce the unclipped objective") {
    std::mt19937_64 rng(3);
    auto in = random_instance(rng, 6, 0.01);
    GrpoConfig cfg;
    const auto s = surrogate_loss(in.params, in.batch, cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : in.batch) {
      const auto lp = oracle::token_logprobs(in.params, r.seq);
      for (std::size_t t = 0; t < lp.size(); ++t, ++n) sum += std::exp(lp[t] - r.behavior_logprobs[t]) * r.advantage;
    }
    CHECK(s->clip_fraction == 0.0);
    CHECK(s->loss.value == doctest::Approx(-sum / static_cast<double>(n)).epsilon(1e-12));
  }

  TEST_CASE("surrogate matches a direct objective oracle and its finite differences") {
    std::mt19937_64 rng(4);
    int checked = 0;
    for (int trial = 0; checked < 100; ++trial) {
      auto in = random_instance(rng, 5, 0.25);
      GrpoConfig cfg;
      cfg.ratio_level = trial % 2 ? RatioLevel::sequence : RatioLevel::token;
      if (min_distance_to_clip_edges(in, cfg) < 1e-3) continue;
      const auto s = surrogate_loss(in.params, in.batch, cfg);
      if (cfg.ratio_level == RatioLevel::token)
        CHECK(s->loss.value == doctest::Approx(-oracle_token_objective(in.params, in.batch, cfg.clip_eps)).epsilon(1e-12));
      const auto fd = oracle::finite_difference(in.params, [&](const PolicyParams& p) { return surrogate_loss(p, in.batch, cfg)->loss.value; });
      CHECK(oracle::relative_error(s->loss.gradient, fd) < 1e-4);
      ++checked;
    }
  }

  TEST_CASE("empty batch signals a skipped step") {
    const PolicyParams p(PolicyShape{3, 2, 1, 1, 2});
    CHECK_FALSE(surrogate_loss(p, {}, GrpoConfig{}).has_value());
    CHECK_FALSE(total_loss(p, p, {}, GrpoConfig{}, 0).has_value());
  }

  TEST_CASE("k3 KL penalty") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
      auto in = random_instance(rng, 6, 0.4);
      const auto same = kl_penalty(in.params, in.params, in.batch);
      CHECK(same.value == 0.0);
      for (double g : same.gradient) CHECK(std::abs(g) <= 1e-8);

      const auto k = kl_penalty(in.params, in.behavior, in.batch);
      CHECK(k.value >= 0.0);
      for (const auto& r : in.batch) {
        const auto a = oracle::token_logprobs(in.params, r.seq), b = oracle::token_logprobs(in.behavior, r.seq);
        for (std::size_t t = 0; t < a.size(); ++t) {
          const double d = b[t] - a[t];
          CHECK(std::exp(d) - d - 1.0 >= 0.0);
        }
      }
      const auto fd = oracle::finite_difference(in.params, [&](const PolicyParams& p) { return kl_penalty(p, in.behavior, in.batch).value; });
      CHECK(oracle::relative_error(k.gradient, fd) < 1e-5);
    }
  }

  TEST_CASE("total loss composes its terms and differentiates correctly") {
    std::mt19937_64 rng(6);
    int checked = 0;
    for (int trial = 0; checked < 20; ++trial) {
      auto in = random_instance(rng, 5, 0.2);
      GrpoConfig cfg;
      cfg.kl_enabled = true;
      cfg.kl_coef = 0.05;
      if (min_distance_to_clip_edges(in, cfg) < 1e-3) continue;
      const PolicyParams ref = oracle::random_params(in.params.shape(), 1.0, rng);
      const std::int64_t step = 200;
      const auto tl = total_loss(in.params, ref, in.batch, cfg, step);
      REQUIRE(tl);
      const double beta = entropy_coef(cfg.entropy, step);
      const auto& r = tl->report;
      CHECK(r.total_loss == doctest::Approx(r.surrogate_loss + cfg.kl_coef * r.kl_penalty - beta * r.entropy_bonus).epsilon(1e-12));
      CHECK(r.grad_norm_pre_clip == doctest::Approx(global_norm(tl->gradient)));
      const auto fd = oracle::finite_difference(in.params, [&](const PolicyParams& p) { return total_loss(p, ref, in.batch, cfg, step)->report.total_loss; });
      CHECK(oracle::relative_error(tl->gradient, fd) < 1e-4);

      cfg.kl_enabled = false;
      CHECK(total_loss(in.params, ref, in.batch, cfg, step)->report.kl_penalty == 0.0);
      ++checked;
    }
  }

  TEST_CASE("parameter update") {
    const PolicyShape shape{3, 2, 1, 1, 2};
    std::mt19937_64 rng(7);
    const auto start = oracle::random_params(shape, 1.0, rng);
    GrpoConfig cfg;
    cfg.learning_rate = 0.5;

    auto p = start;
    CHECK(apply_update(p, ParamTensor(p.size(), 0.0), cfg) == 0.0);
    CHECK(p == start);

    ParamTensor g(p.size(), 0.0);
    g[0] = 6.0;
    g[1] = 8.0;
    CHECK(apply_update(p, g, cfg) == doctest::Approx(10.0));
    ParamTensor delta(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) delta[i] = (start.data()[i] - p.data()[i]) / cfg.learning_rate;
    CHECK(global_norm(delta) == doctest::Approx(1.0).epsilon(1e-12));

    auto a = start, b = start;
    apply_update(a, g, cfg);
    apply_update(b, g, cfg);
    CHECK(a == b);

    g[2] = std::numeric_limits<double>::quiet_NaN();
    auto c = start;
    CHECK_THROWS_WITH(apply_update(c, g, cfg), "diverged");
  }

  TEST_CASE("config constraints") {
    GrpoConfig cfg;
    CHECK(violations(cfg).empty());
    cfg.clip_eps = 1.0;
    cfg.learning_rate = 0.0;
    CHECK(violations(cfg).size() == 2);
    CHECK(parse_ratio_level("sequence") == RatioLevel::sequence);
    CHECK_THROWS(parse_ratio_level("episode"));
  }
}
