#include <doctest.h>

#include <algorithm>

#include "padrl/envs.hpp"
#include "padrl/rewards.hpp"

using namespace padrl;

namespace {

LengthRewardConfig budget_2000() { return LengthRewardConfig{2000, 0.005, 0.5, 0.5}; }

}  // namespace

TEST_SUITE("rewards") {
  TEST_CASE("length reward examples") {
    const auto cfg = budget_2000();
    CHECK(length_reward(2000, cfg) == 0.5);
    CHECK(length_reward(1800, cfg) == 1.0);
    CHECK(length_reward(2200, cfg) == 0.0);
    CHECK(length_reward(1900, cfg) == 1.0);
    CHECK(length_reward(2100, cfg) == 0.0);
    CHECK(length_reward(1950, cfg) == doctest::Approx(0.75));
    CHECK(length_reward(0, cfg) == 1.0);
  }

  TEST_CASE("length reward is clipped and non-increasing") {
    for (const auto& cfg : {budget_2000(), LengthRewardConfig{11, 0.03, 0.5, 1.0}, LengthRewardConfig{32, 0.2, 0.0, 1.0}}) {
      CHECK(length_reward(static_cast<std::size_t>(cfg.l_budget), cfg) == cfg.delta);
      double prev = 2.0;
      for (std::size_t L = 0; L <= 5000; ++L) {
        const double r = length_reward(L, cfg);
        CHECK_UNARY(r >= 0.0);
        CHECK_UNARY(r <= 1.0);
        CHECK_UNARY(r <= prev);
        if (r > 0.0 && r < 1.0 && prev > 0.0 && prev < 1.0) CHECK_UNARY(r < prev);
        const double raw = cfg.alpha * (cfg.l_budget - static_cast<double>(L)) + cfg.delta;
        CHECK(r == doctest::Approx(std::clamp(raw, 0.0, 1.0)).epsilon(1e-12));
        prev = r;
      }
    }
  }

  TEST_CASE("composition") {
    Prompt p;
    p.task = TaskKind::digit_sum;
    p.spec = {5};
    p.condition = 5;
    const LengthRewardConfig cfg{3, 0.005, 0.5, 0.5};
    const TokenSequence right{0, 5, {2, 3, kEosToken}};
    const TokenSequence wrong{0, 5, {2, 2, kEosToken}};

    const auto r = total_reward(p, right, cfg, true);
    CHECK(r.r_acc == 1);
    CHECK(r.r_len == 0.5);
    CHECK(r.r_total == 1.25);

    const auto off = total_reward(p, wrong, cfg, false);
    CHECK(off.r_acc == 0);
    CHECK(off.r_len == 0.0);
    CHECK(off.r_total == 0.0);

    LengthRewardConfig zero = cfg;
    zero.w_len = 0.0;
    for (const auto& s : {right, wrong}) {
      const auto z = total_reward(p, s, zero, true);
      CHECK(z.r_total == z.r_acc);
    }
  }

  TEST_CASE("config constraints") {
    CHECK(violations(LengthRewardConfig{}).empty());
    CHECK_FALSE(violations(LengthRewardConfig{32, 0.0, 0.5, 0.5}).empty());
    CHECK_FALSE(violations(LengthRewardConfig{32, 0.005, 1.5, 0.5}).empty());
    CHECK_FALSE(violations(LengthRewardConfig{32, 0.005, 0.5, -1.0}).empty());
  }
}
