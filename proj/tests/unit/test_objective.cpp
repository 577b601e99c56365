// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "../oracles.hpp"
#include "drpo/error.hpp"
#include "drpo/objective.hpp"
#include "drpo/synthenv.hpp"
#include "helpers.hpp"

using namespace drpo;

namespace {

/// One parameter theta; token 1 has probability sigmoid(theta), token 0 the rest.
class ScalarLogistic : public TokenPolicy {
 public:
  explicit ScalarLogistic(double theta) : theta_(theta) {}
  std::size_t parameter_count() const override { return 1; }
  double token_logp(const Rollout& rollout, std::size_t k) const override {
    const double p = 1.0 / (1.0 + std::exp(-theta_));
    return rollout.tokens.token_ids[k] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  void accumulate_logp_gradient(const Rollout& rollout, std::size_t k, double scale,
                                std::span<double> grad) const override {
    const double p = 1.0 / (1.0 + std::exp(-theta_));
    grad[0] += scale * (rollout.tokens.token_ids[k] == 1 ? 1.0 - p : -p);
  }

 private:
  double theta_;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("clipped_term worked cases") {
  CHECK(clipped_term(1.5, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(clipped_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(clipped_term(1.1, 1.0, 0.2) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(clipped_term(0.5, 1.0, 0.2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(clipped_term(1.5, -1.0, 0.2) == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(clipped_term(1.5, 0.0, 0.2) == 0.0);
}

TEST_CASE("token_ratio and token_kl") {
  TokenSequence t;
  t.logp_current = {std::log(0.6)};
  t.logp_old = {std::log(0.4)};
  t.logp_ref = {std::log(0.3)};
  CHECK(token_ratio(t, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(token_kl(std::log(0.5), std::log(0.25)) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("unit-ratio batch: J is the mean advantage minus the KL penalty") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto rs = test::random_rollouts(rng, {});
    for (auto& r : rs) r.tokens.logp_old = r.tokens.logp_current;
    const auto batch = build_iteration_batch(rs);
    const AdvantageTensor adv = compute_advantages(batch, Estimator::kDrpo, {}, 1);
    ObjectiveConfig cfg;
    cfg.kl_coef = 0.05;
    const ObjectiveValue j = surrogate_objective(batch, adv, cfg);

    double expected = 0.0;
    std::size_t groups = 0;
    for (const auto& [_, domain] : batch.domains) {
      for (const auto& group : domain.groups) {
        double a = 0.0, kl = 0.0;
        for (const auto& r : group.rollouts) {
          a += adv.find(r.rollout_id)->advantage;
          kl += std::exp(r.tokens.logp_current[0]) * (r.tokens.logp_current[0] - r.tokens.logp_ref[0]);
        }
        const double n = static_cast<double>(group.rollouts.size());
        expected += a / n - cfg.kl_coef * kl / n;
        ++groups;
      }
    }
    expected /= static_cast<double>(groups);
    REQUIRE(j.value == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("scalar logistic policy: gradient matches the closed form") {
  // Two rollouts of one token each; current differs from old so one ratio clips.
  const double theta = 0.3;
  const double theta_old = -0.1;
  const double theta_ref = 0.0;
  std::vector<Rollout> rs;
  for (int i = 0; i < 2; ++i) {
    Rollout r = test::make_rollout("q", i, "d", i == 0 ? 1.0 : 0.0);
    const int token = i == 0 ? 1 : 0;
    r.tokens.token_ids = {token};
    const auto lp = [&](double th) { return token == 1 ? std::log(sigmoid(th)) : std::log(1 - sigmoid(th)); };
    r.tokens.logp_current = {lp(theta)};
    r.tokens.logp_old = {lp(theta_old)};
    r.tokens.logp_ref = {lp(theta_ref)};
    rs.push_back(r);
  }
  const auto batch = build_iteration_batch(rs);
  const AdvantageTensor adv = compute_advantages(batch, Estimator::kGrpo, {}, 0);
  ObjectiveConfig cfg;
  cfg.clip = 0.2;
  cfg.kl_coef = 0.1;

  const ScalarLogistic policy(theta);
  const double p = sigmoid(theta);
  const double p_old = sigmoid(theta_old);
  double expected = 0.0;
  // Rollout 0 takes token 1 with positive advantage.
  {
    const double a = adv.find("q-r00")->advantage;
    const double ratio = p / p_old;
    const double dlogp = 1 - p;
    const bool clipped = a > 0 ? ratio > 1 + cfg.clip : ratio < 1 - cfg.clip;
    const double lc = std::log(p), lr = std::log(sigmoid(theta_ref));
    expected += 0.5 * ((clipped ? 0.0 : a * ratio * dlogp) - cfg.kl_coef * std::exp(lc) * (lc - lr + 1) * dlogp);
  }
  // Rollout 1 takes token 0 with negative advantage.
  {
    const double a = adv.find("q-r01")->advantage;
    const double ratio = (1 - p) / (1 - p_old);
    const double dlogp = -p;
    const bool clipped = a > 0 ? ratio > 1 + cfg.clip : ratio < 1 - cfg.clip;
    const double lc = std::log(1 - p), lr = std::log(1 - sigmoid(theta_ref));
    expected += 0.5 * ((clipped ? 0.0 : a * ratio * dlogp) - cfg.kl_coef * std::exp(lc) * (lc - lr + 1) * dlogp);
  }
  const auto grad = objective_gradient(policy, batch, adv, cfg);
  REQUIRE(grad.size() == 1);
  CHECK(grad[0] == doctest::Approx(expected).epsilon(1e-12));
  // The first ratio sits above 1 + clip and is cut off; the second is inside the band.
  CHECK(p / p_old > 1.2);
  CHECK((1 - p) / (1 - p_old) > 0.8);
}

TEST_CASE("toy policy: analytic gradient matches central differences") {
  EnvironmentSpec spec;
  spec.domains = {{"a", 0.6, 3, 0.3, 8}, {"b", 0.4, 2, 0.6, 8}};
  spec.feature_dim = 4;
  const Environment env(spec);
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 0.5);
  int checked = 0;
  for (int trial = 0; checked < 60 && trial < 400; ++trial) {
    PolicySnapshots pol{ToyPolicy(spec), ToyPolicy(spec), ToyPolicy(spec)};
    for (auto& x : pol.reference.parameters()) x = n(rng);
    for (std::size_t i = 0; i < pol.old.parameter_count(); ++i)
      pol.old.parameters()[i] = pol.reference.parameters()[i] + n(rng) * 0.3;
    for (std::size_t i = 0; i < pol.current.parameter_count(); ++i)
      pol.current.parameters()[i] = pol.old.parameters()[i] + n(rng) * 0.3;
    const auto questions = env.generate_batch(6, static_cast<std::uint64_t>(trial), 0);
    std::vector<Rollout> rs;
    for (std::size_t q = 0; q < questions.size(); ++q) {
      const auto g = rollout_group(env, pol, questions[q], 4, derive_seed(trial, q), {});
      rs.insert(rs.end(), g.rollouts.begin(), g.rollouts.end());
    }
    const auto batch = build_iteration_batch(rs);
    const AdvantageTensor adv = compute_advantages(batch, Estimator::kDrpo, {}, 0);
    ObjectiveConfig cfg;
    cfg.kl_coef = 0.05;

    // Skip instances with a ratio near a clip boundary: the objective has a kink there.
    bool near_kink = false;
    for (const auto& r : rs)
      for (std::size_t k = 0; k < r.tokens.size(); ++k) {
        const double ratio = token_ratio(r.tokens, k);
        near_kink = near_kink || std::abs(ratio - 1.2) < 1e-3 || std::abs(ratio - 0.8) < 1e-3;
      }
    if (near_kink) continue;

    const ToyTokenPolicy tp(pol.current, questions);
    const auto analytic = objective_gradient(tp, batch, adv, cfg);
    const auto f = [&](const std::vector<double>& x) {
      ToyPolicy moved = pol.current;
      std::copy(x.begin(), x.end(), moved.parameters().begin());
      return policy_objective(ToyTokenPolicy(moved, questions), batch, adv, cfg).value;
    };
    const std::vector<double> x0(pol.current.parameters().begin(), pol.current.parameters().end());
    const auto numeric = oracle::central_differences(f, x0, 1e-5);
    REQUIRE(oracle::relative_error(analytic, numeric) < 1e-4);
    // Value under the policy equals the stored-log-prob surrogate.
    REQUIRE(policy_objective(tp, batch, adv, cfg).value ==
            doctest::Approx(surrogate_objective(batch, adv, cfg).value).epsilon(1e-10));
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("objective rejects a missing advantage") {
  std::vector<Rollout> rs;
  test::add_group(rs, "q", "d", {0.0, 1.0});
  const auto batch = build_iteration_batch(rs);
  AdvantageTensor empty;
  CHECK_THROWS_AS(surrogate_objective(batch, empty, {}), ValidationError);
  CHECK_THROWS_AS((ObjectiveConfig{-0.1, 0.0}.validate()), ValidationError);
}
