// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "../oracles.hpp"
#include "drpo/advantage.hpp"
#include "drpo/error.hpp"
#include "helpers.hpp"

using namespace drpo;
using drpo::test::add_group;
using drpo::test::make_rollout;

namespace {

AdvantageConfig no_epsilon() {
  AdvantageConfig cfg;
  cfg.epsilon = 0.0;
  return cfg;
}

double adv(const AdvantageTensor& t, const std::string& id) {
  const AdvantageEntry* e = t.find(id);
  REQUIRE(e != nullptr);
  return e->advantage;
}

}  // namespace

TEST_CASE("GRPO worked example") {
  std::vector<Rollout> rs;
  add_group(rs, "q0", "d", {0.2, 0.4, 0.6, 0.8});
  const auto batch = build_iteration_batch(rs);
  const AdvantageTensor t = grpo_advantages(batch, 0.0);
  const double outer = 3.0 / std::sqrt(5.0);
  const double inner = 1.0 / std::sqrt(5.0);
  CHECK(adv(t, "q0-r00") == doctest::Approx(-outer).epsilon(1e-12));
  CHECK(adv(t, "q0-r01") == doctest::Approx(-inner).epsilon(1e-12));
  CHECK(adv(t, "q0-r02") == doctest::Approx(inner).epsilon(1e-12));
  CHECK(adv(t, "q0-r03") == doctest::Approx(outer).epsilon(1e-12));
  CHECK(outer == doctest::Approx(1.3416).epsilon(1e-4));
  CHECK(inner == doctest::Approx(0.4472).epsilon(1e-4));

  const AdvantageTensor te = grpo_advantages(batch, 1e-4);
  CHECK(adv(te, "q0-r03") == doctest::Approx(0.3 / (std::sqrt(0.05) + 1e-4)).epsilon(1e-12));
}

TEST_CASE("constant groups get zero advantage") {
  std::vector<Rollout> rs;
  add_group(rs, "q0", "d", {0.7, 0.7, 0.7});
  add_group(rs, "q1", "d", {0.1, 0.9, 0.5});
  const auto batch = build_iteration_batch(rs);
  for (const Estimator e : {Estimator::kGrpo, Estimator::kDrpo, Estimator::kDrpoNoKl, Estimator::kDrpoDomainOnly}) {
    const AdvantageTensor t = compute_advantages(batch, e, {}, 0);
    for (int i = 0; i < 3; ++i) CHECK(adv(t, fmt::format("q0-r{:02d}", i)) == 0.0);
  }
}

TEST_CASE("temperature law") {
  CHECK(temperature(4, 0.6, 1e-4) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(temperature(1, 0.5, 1e-4) == 0.5);
  CHECK(temperature(9, 0.0, 1e-4) == 1e-4);
  CHECK(temperature(100, 1e-9, 1e-4) == 1e-4);
}

TEST_CASE("domain and cluster temperatures") {
  std::vector<Rollout> rs;
  for (int q = 0; q < 4; ++q) add_group(rs, fmt::format("a{}", q), "a", {0.4, 0.8});
  add_group(rs, "b0", "b", {0.25, 0.75});
  const auto batch = build_iteration_batch(rs);
  const auto temps = domain_temperatures(batch, 1e-4);
  CHECK(temps.at("a") == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(temps.at("b") == doctest::Approx(0.5).epsilon(1e-12));

  ClusterModel model;
  model.k = 2;
  model.assignments = {0, 0, 0, 1};
  const auto tc = cluster_temperatures(batch.domains.at("a"), model, 1e-4);
  CHECK(tc[0] == doctest::Approx(std::sqrt(3.0) * 0.6).epsilon(1e-12));
  CHECK(tc[1] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("single-token KL worked example") {
  TokenSequence t;
  t.logp_current = {std::log(0.5)};
  t.logp_old = {std::log(0.5)};
  t.logp_ref = {std::log(0.25)};
  CHECK(rollout_kl(t) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("question KL sums sampled rollouts only") {
  QuestionGroup g;
  g.question_id = "q";
  g.domain = "d";
  g.rollouts.push_back(make_rollout("q", 0, "d", 0.0, std::log(0.5), std::log(0.25)));
  g.rollouts.push_back(make_rollout("q", 1, "d", 0.0, std::log(0.5), std::log(0.25)));
  g.rollouts.push_back(make_rollout("q", 2, "d", 0.0, std::log(0.5), std::log(0.125)));
  g.rollouts.back().is_greedy = true;
  const QuestionKl k = question_kl(g);
  CHECK(k.total == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(k.per_rollout[2] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("percentile matches the rank-form oracle") {
  CHECK(percentile({1, 2, 3, 4, 5}, 0.9) == doctest::Approx(4.6).epsilon(1e-12));
  CHECK(percentile({7}, 0.9) == 7.0);
  CHECK_THROWS_AS(percentile({}, 0.5), ValidationError);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(static_cast<std::size_t>(1 + t % 37));
    for (auto& x : v) x = n(rng);
    const double p = std::uniform_real_distribution<double>(0, 1)(rng);
    REQUIRE(percentile(v, p) == doctest::Approx(oracle::percentile(v, p)).epsilon(1e-12));
  }
}

TEST_CASE("KL damping worked case") {
  const std::vector<double> pre{1.0, 1.0, 1.0};
  const std::vector<double> kl{2.0, 2.0, 2.0};
  const DampingResult d = kl_damping(pre, kl, {});
  CHECK(d.threshold == doctest::Approx(2.0).epsilon(1e-12));
  for (const double m : d.m) CHECK(std::abs(m - 0.5) <= 1e-12);
}

TEST_CASE("KL damping properties") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0, 1);
  std::exponential_distribution<double> e(1.0);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t len = 1 + static_cast<std::size_t>(t % 50);
    std::vector<double> pre(len), kl(len);
    for (std::size_t i = 0; i < len; ++i) {
      pre[i] = n(rng);
      kl[i] = (t % 5 == 0) ? -e(rng) : e(rng);
    }
    const DampingResult d = kl_damping(pre, kl, {});
    for (std::size_t i = 0; i < len; ++i) {
      REQUIRE(d.m[i] > 0.0);
      REQUIRE(d.m[i] <= 1.0);
      if (pre[i] * kl[i] <= 0.0) REQUIRE(d.m[i] == 1.0);
    }
  }
  const std::vector<double> neg{-1.0, -2.0};
  const std::vector<double> pos{1.0, 1.0};
  const DampingResult d = kl_damping(neg, pos, {});
  CHECK(d.m == std::vector<double>{1.0, 1.0});
  KlDampingConfig off;
  off.enabled = false;
  CHECK(kl_damping(std::vector<double>{5.0}, std::vector<double>{5.0}, off).m[0] == 1.0);
}

TEST_CASE("baseline estimators worked examples") {
  std::vector<Rollout> rs;
  add_group(rs, "q0", "d", {1.0, 0.0, 0.0, 1.0});
  const auto batch = build_iteration_batch(rs);

  const AdvantageTensor rloo = compute_advantages(batch, Estimator::kRloo, {}, 0);
  CHECK(adv(rloo, "q0-r00") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(adv(rloo, "q0-r01") == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));

  const AdvantageTensor pp = compute_advantages(batch, Estimator::kReinforcePP, {}, 0);
  CHECK(adv(pp, "q0-r00") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv(pp, "q0-r01") == doctest::Approx(-1.0).epsilon(1e-12));

  const AdvantageTensor raw = compute_advantages(batch, Estimator::kReinforce, {}, 0);
  CHECK(adv(raw, "q0-r00") == 1.0);
  CHECK(adv(raw, "q0-r01") == 0.0);

  CHECK_THROWS_AS(compute_advantages(batch, Estimator::kReMax, {}, 0), ValidationError);
  std::vector<Rollout> with_greedy = rs;
  Rollout g = make_rollout("q0", 4, "d", 0.5);
  g.is_greedy = true;
  with_greedy.push_back(g);
  const auto gb = build_iteration_batch(with_greedy);
  const AdvantageTensor remax = compute_advantages(gb, Estimator::kReMax, {}, 0);
  CHECK(adv(remax, "q0-r00") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(adv(remax, "q0-r01") == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(adv(remax, "q0-r04") == 0.0);
  // The greedy rollout does not enter GRPO statistics either.
  const AdvantageTensor grpo = compute_advantages(gb, Estimator::kGrpo, no_epsilon(), 0);
  CHECK(adv(grpo, "q0-r00") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv(grpo, "q0-r04") == 0.0);
}

TEST_CASE("two-domain batch: the smaller, harder domain gets twice the advantage") {
  std::vector<Rollout> rs;
  for (int q = 0; q < 4; ++q) add_group(rs, fmt::format("a{}", q), "a", {0.4, 0.8});
  for (int q = 0; q < 4; ++q) add_group(rs, fmt::format("b{}", q), "b", {0.1, 0.5});
  const auto batch = build_iteration_batch(rs);
  const AdvantageTensor t = compute_advantages(batch, Estimator::kDrpoDomainOnly, no_epsilon(), 0);
  CHECK(t.temperatures.domain.at("a") == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(t.temperatures.domain.at("b") == doctest::Approx(0.6).epsilon(1e-12));
  const double a = adv(t, "a0-r01");
  const double b = adv(t, "b0-r01");
  CHECK(b / a == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a == doctest::Approx(std::sqrt(0.4)).epsilon(1e-12));
  CHECK(adv(t, "a0-r00") == doctest::Approx(-std::sqrt(0.4)).epsilon(1e-12));
}

TEST_CASE("advantages replay exactly from their diagnostics") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    const auto batch = build_iteration_batch(test::random_rollouts(rng, {}));
    for (const Estimator e : {Estimator::kGrpo, Estimator::kDrpo, Estimator::kDrpoNoKl, Estimator::kDrpoDomainOnly,
                              Estimator::kRloo, Estimator::kReinforcePP, Estimator::kReinforce}) {
      const AdvantageTensor a = compute_advantages(batch, e, {}, static_cast<std::uint64_t>(t));
      for (const auto& entry : a.entries) REQUIRE(replay_advantage(entry.reward, entry.diagnostics) == entry.advantage);
    }
  }
}

TEST_CASE("DRPO variants differ only in damping and clustering") {
  std::mt19937_64 rng(37);
  const auto batch = build_iteration_batch(test::random_rollouts(rng, {}));
  const AdvantageTensor full = compute_advantages(batch, Estimator::kDrpo, {}, 3);
  const AdvantageTensor nokl = compute_advantages(batch, Estimator::kDrpoNoKl, {}, 3);
  const AdvantageTensor dom = compute_advantages(batch, Estimator::kDrpoDomainOnly, {}, 3);
  REQUIRE(full.entries.size() == nokl.entries.size());
  bool any_damped = false;
  for (std::size_t i = 0; i < full.entries.size(); ++i) {
    const auto& f = full.entries[i].diagnostics;
    const auto& n = nokl.entries[i].diagnostics;
    CHECK(n.m == 1.0);
    CHECK(dom.entries[i].diagnostics.m == 1.0);
    CHECK(dom.entries[i].diagnostics.t_cluster == 1.0);
    CHECK(f.t_cluster == n.t_cluster);
    CHECK(f.t_domain == n.t_domain);
    CHECK(f.m > 0.0);
    CHECK(f.m <= 1.0);
    any_damped = any_damped || f.m < 1.0;
  }
  CHECK(any_damped);
}

TEST_CASE("DRPO is deterministic in the seed") {
  std::mt19937_64 rng(41);
  const auto batch = build_iteration_batch(test::random_rollouts(rng, {}));
  const auto a = compute_advantages(batch, Estimator::kDrpo, {}, 8).values();
  const auto b = compute_advantages(batch, Estimator::kDrpo, {}, 8).values();
  CHECK(a == b);
}

TEST_CASE("normalization invariants on random batches") {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 100; ++t) {
    const auto batch = build_iteration_batch(test::random_rollouts(rng, {}));
    const AdvantageTensor grpo = compute_advantages(batch, Estimator::kGrpo, no_epsilon(), 0);
    const AdvantageTensor drpo = compute_advantages(batch, Estimator::kDrpoNoKl, no_epsilon(), 0);
    std::vector<double> all;
    std::size_t i = 0;
    for (const auto& [_, domain] : batch.domains) {
      for (const auto& group : domain.groups) {
        std::vector<double> g, d;
        for (std::size_t r = 0; r < group.rollouts.size(); ++r, ++i) {
          g.push_back(grpo.entries[i].advantage);
          d.push_back(drpo.entries[i].advantage);
        }
        all.insert(all.end(), d.begin(), d.end());
        REQUIRE(std::abs(mean(g)) <= 1e-12);
        REQUIRE(std::abs(mean(d)) <= 1e-12);
        if (grpo.entries[i - 1].diagnostics.group_std > 0) REQUIRE(std::abs(population_std(g) - 1.0) <= 1e-9);
      }
    }
    REQUIRE(std::abs(population_std(all) - 1.0) <= 1e-9);
  }
}

TEST_CASE("single-domain, single-cluster, undamped DRPO is a rescaled GRPO") {
  std::mt19937_64 rng(47);
  test::RandomBatchShape shape;
  shape.min_domains = shape.max_domains = 1;
  AdvantageConfig cfg;
  cfg.elbow.max_clusters = 1;
  for (int t = 0; t < 50; ++t) {
    const auto batch = build_iteration_batch(test::random_rollouts(rng, shape));
    const auto g = compute_advantages(batch, Estimator::kGrpo, cfg, 0).values();
    const auto d = compute_advantages(batch, Estimator::kDrpoNoKl, cfg, 0).values();
    std::size_t pivot = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(g[i]) > std::abs(g[pivot])) pivot = i;
    const double scale = d[pivot] / g[pivot];
    REQUIRE(scale > 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(std::abs(d[i] - scale * g[i]) <= 1e-9 * std::abs(scale * g[i]) + 1e-15);
  }
}

TEST_CASE("estimator names round-trip") {
  for (const Estimator e : {Estimator::kGrpo, Estimator::kDrpo, Estimator::kDrpoDomainOnly, Estimator::kDrpoNoKl,
                            Estimator::kRloo, Estimator::kReinforcePP, Estimator::kReMax, Estimator::kReinforce}) {
    CHECK(parse_estimator(to_string(e)) == e);
  }
  CHECK_THROWS_AS(parse_estimator("ppo"), ValidationError);
}
