#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "padrl/pad.hpp"

using namespace padrl;

namespace {

std::vector<Rollout> batch_with(const std::vector<double>& advantages) {
  std::vector<Rollout> out;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    Rollout r;
    r.seq.prompt_id = i;
    r.advantage = advantages[i];
    out.push_back(r);
  }
  return out;
}

std::vector<std::uint64_t> ids(const DistilledBatch& b) {
  std::vector<std::uint64_t> out;
  for (const auto& r : b.selected) out.push_back(r.seq.prompt_id);
  return out;
}

}  // namespace

TEST_SUITE("pad") {
  TEST_CASE("effective-set filter") {
    const auto b = batch_with({0.0, 0.5, -2.0, 3.5});
    CHECK(filter_effective(b, 0.1, 3.0).indices == std::vector<std::size_t>{1, 2});
    CHECK(filter_effective(b, 0.1, std::numeric_limits<double>::max()).indices == std::vector<std::size_t>{1, 2, 3});
    CHECK(filter_effective(batch_with({0, 0, 0}), 0.05, 10).empty());
    const auto edge = filter_effective(batch_with({0.1, -3.0, 0.0999}), 0.1, 3.0);
    CHECK(edge.indices == std::vector<std::size_t>{0, 1});
    CHECK(edge.abs_advantage == std::vector<double>{0.1, 3.0});
  }

  TEST_CASE("sampling probabilities") {
    const auto p = sampling_probabilities(std::vector<double>{2.0, 1.0}, 1.0);
    CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-4));
    CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
    for (double v : sampling_probabilities(std::vector<double>(5, 1.7), 0.4)) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
    const auto cold = sampling_probabilities(std::vector<double>{1.0, 1.5, 0.2}, 1e-3);
    CHECK(cold[1] > 1.0 - 1e-12);
    CHECK_THROWS_WITH(sampling_probabilities(std::vector<double>{}, 1.0), "empty effective set");
    CHECK_THROWS(sampling_probabilities(std::vector<double>{1.0}, 0.0));
    // Large scores overflow a naive exp; the max-shifted form does not.
    const auto big = sampling_probabilities(std::vector<double>{900.0, 899.0}, 0.3);
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] + big[1] == doctest::Approx(1.0));
    const double inf = std::numeric_limits<double>::infinity();
    for (double v : sampling_probabilities(std::vector<double>{inf, 1.0, inf}, 1.0)) CHECK(v == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("probabilities are normalised, positive and monotone on random sets") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.05, 5.0), tau(0.3, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> s(1 + static_cast<std::size_t>(trial % 40));
      for (double& v : s) v = u(rng);
      const auto p = sampling_probabilities(s, tau(rng));
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
      for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(p[i] > 0.0);
        for (std::size_t j = 0; j < s.size(); ++j)
          if (s[i] > s[j]) CHECK(p[i] > p[j]);
      }
    }
  }

  TEST_CASE("temperature schedule") {
    const TemperatureSchedule s;
    CHECK(tau_at(s, 0) == 1.0);
    CHECK(tau_at(s, s.horizon) == 0.3);
    CHECK(tau_at(s, s.horizon / 2) == 0.65);
    CHECK(tau_at(s, 10 * s.horizon) == 0.3);
    double prev = 2.0;
    for (std::int64_t t = 0; t <= s.horizon + 10; ++t) {
      const double v = tau_at(s, t);
      CHECK_UNARY(v <= prev);
      CHECK_UNARY(v >= 0.3);
      CHECK_UNARY(v <= 1.0);
      prev = v;
    }
  }

  TEST_CASE("distill examples") {
    PadConfig cfg;
    cfg.rho = 0.5;
    cfg.t_low = 0.1;
    const auto b = batch_with({0, 0, 0.5, 0, -1.2, 0, 2.0, 0});
    const auto d = distill(b, cfg, 0, 9);
    CHECK(d.effective_set_size == 3);
    CHECK(d.k_prime == 3);
    CHECK(d.selected_indices == std::vector<std::size_t>{2, 4, 6});

    CHECK(distill(batch_with(std::vector<double>(8, 0.0)), cfg, 0, 9).empty());

    cfg.rho = 1.0;
    const auto all = batch_with({0.5, -0.5, 1.0, -1.0});
    const auto full = distill(all, cfg, 0, 3);
    CHECK(ids(full) == std::vector<std::uint64_t>{0, 1, 2, 3});
  }

  TEST_CASE("distill laws on random batches") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-3, 3), rho(0.05, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> a(1 + static_cast<std::size_t>(trial % 64));
      for (double& v : a) v = (trial % 3 == 0 && (rng() & 1)) ? 0.0 : u(rng);
      PadConfig cfg;
      cfg.rho = rho(rng);
      cfg.t_low = 0.3;
      cfg.t_high = 2.5;
      const auto b = batch_with(a);
      const auto d = distill(b, cfg, trial, static_cast<std::uint64_t>(trial));
      const auto e = filter_effective(b, cfg.t_low, cfg.t_high);
      CHECK(d.effective_set_size == e.size());
      CHECK(d.k_prime == std::min<std::size_t>(static_cast<std::size_t>(std::ceil(cfg.rho * static_cast<double>(a.size()))), e.size()));
      CHECK(d.selected.size() == d.k_prime);
      std::set<std::size_t> uniq(d.selected_indices.begin(), d.selected_indices.end());
      CHECK(uniq.size() == d.selected_indices.size());
      for (const auto& r : d.selected) {
        CHECK(std::abs(r.advantage) >= cfg.t_low);
        CHECK(std::abs(r.advantage) <= cfg.t_high);
      }
      CHECK(ids(d) == ids(distill(b, cfg, trial, static_cast<std::uint64_t>(trial))));
    }
  }

  TEST_CASE("single draws follow the softmax probabilities") {
    const std::vector<double> scores{0.2, 0.9, 1.4, 2.3, 0.5};
    const double tau = 0.65;
    const auto p = sampling_probabilities(scores, tau);
    std::vector<double> logw;
    for (double v : p) logw.push_back(std::log(v));
    const int n = 100000;
    std::vector<int> counts(scores.size(), 0);
    for (int i = 0; i < n; ++i) ++counts[weighted_sample_without_replacement(logw, 1, static_cast<std::uint64_t>(i))[0]];
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(counts[i] - n * p[i]) <= 3.0 * std::sqrt(n * p[i] * (1 - p[i])));
  }

  TEST_CASE("sampling without replacement never picks excluded entries") {
    const double ninf = -std::numeric_limits<double>::infinity();
    const std::vector<double> logw{0.0, ninf, 0.0, ninf};
    for (std::uint64_t s = 0; s < 100; ++s) {
      auto pick = weighted_sample_without_replacement(logw, 4, s);
      std::sort(pick.begin(), pick.end());
      CHECK(pick == std::vector<std::size_t>{0, 2});
    }
  }

  TEST_CASE("strategies") {
    PadConfig cfg;
    cfg.t_low = 0.1;
    cfg.rho = 0.5;
    const auto b = batch_with({0.0, 0.5});
    const auto base = select_strategy(Strategy::grpo_baseline, b, cfg, 0, 1);
    CHECK(base.selected_indices == std::vector<std::size_t>{0, 1});
    CHECK(select_strategy(Strategy::grpo_filter, b, cfg, 0, 1).selected_indices == std::vector<std::size_t>{1});

    const auto big = batch_with({0, 1, 0, -1, 0, 2, 0, 0, 0, 1});
    const auto r1 = select_strategy(Strategy::random_sampling, big, cfg, 0, 5);
    CHECK(r1.selected.size() == 5);
    CHECK(r1.selected_indices == select_strategy(Strategy::random_sampling, big, cfg, 0, 5).selected_indices);

    CHECK(parse_strategy("grpo_filter") == Strategy::grpo_filter);
    CHECK_THROWS_WITH(parse_strategy("best"), doctest::Contains("pad, grpo_baseline, grpo_filter, random_sampling"));
    for (auto s : {Strategy::pad, Strategy::grpo_baseline, Strategy::grpo_filter, Strategy::random_sampling})
      CHECK(parse_strategy(to_string(s)) == s);
  }

  TEST_CASE("signed priority uses the advantage itself") {
    PadConfig cfg;
    cfg.priority = PriorityMode::signed_advantage;
    cfg.rho = 1.0 / 4;
    const auto b = batch_with({-3.0, 0.5, 0.0, 0.0});
    int neg = 0;
    for (std::uint64_t s = 0; s < 2000; ++s) neg += distill(b, cfg, 5000, s).selected_indices[0] == 0;
    // tau = 0.3: P(-3) = 1 / (1 + e^{(0.5+3)/0.3}) ~ 8.6e-6
    CHECK(neg <= 2);
    cfg.priority = PriorityMode::absolute;
    neg = 0;
    for (std::uint64_t s = 0; s < 2000; ++s) neg += distill(b, cfg, 5000, s).selected_indices[0] == 0;
    CHECK(neg >= 1990);
    CHECK(parse_priority_mode("signed") == PriorityMode::signed_advantage);
  }

  TEST_CASE("config constraints") {
    PadConfig cfg;
    CHECK(violations(cfg).empty());
    cfg.rho = 1.5;
    CHECK(violations(cfg) == std::vector<std::string>{"rho ∈ (0,1]"});
    cfg.rho = 0.5;
    cfg.t_low = 0.0;
    CHECK(violations(cfg).size() == 1);
    CHECK(subsample_size(0.5, 7, 100) == 4);
    CHECK(subsample_size(0.5, 8, 3) == 3);
  }
}
