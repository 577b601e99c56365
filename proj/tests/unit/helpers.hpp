// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "drpo/batch.hpp"

namespace drpo::test {

inline Rollout make_rollout(const std::string& qid, int index, const std::string& domain, double reward,
                            double logp_current = -0.5, double logp_ref = -0.5) {
  Rollout r;
  r.rollout_id = fmt::format("{}-r{:02d}", qid, index);
  r.question_id = qid;
  r.domain = domain;
  r.reward = reward;
  r.tokens.logp_current = {logp_current};
  r.tokens.logp_old = {logp_current};
  r.tokens.logp_ref = {logp_ref};
  r.tokens.token_ids = {1};
  return r;
}

/// Appends one question group with the given rewards.
inline void add_group(std::vector<Rollout>& out, const std::string& qid, const std::string& domain,
                      const std::vector<double>& rewards) {
  for (std::size_t i = 0; i < rewards.size(); ++i)
    out.push_back(make_rollout(qid, static_cast<int>(i), domain, rewards[i]));
}

struct RandomBatchShape {
  int min_domains = 2, max_domains = 9;
  int min_groups = 4, max_groups = 64;
  int min_group_size = 2, max_group_size = 10;
};

/// Random batch with continuous rewards in [0, 1] and random token log-probs.
inline std::vector<Rollout> random_rollouts(std::mt19937_64& rng, const RandomBatchShape& shape) {
  std::uniform_int_distribution<int> nd(shape.min_domains, shape.max_domains);
  std::uniform_int_distribution<int> ng(shape.min_groups, shape.max_groups);
  std::uniform_int_distribution<int> gs(shape.min_group_size, shape.max_group_size);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> lp(-3.0, -0.01);
  const int domains = nd(rng);
  const int groups = ng(rng);
  const int size = gs(rng);
  std::uniform_int_distribution<int> pick(0, domains - 1);
  std::vector<Rollout> out;
  for (int q = 0; q < groups; ++q) {
    // Every domain gets at least one question.
    const int d = q < domains ? q : pick(rng);
    const std::string qid = fmt::format("q{:04d}", q);
    for (int i = 0; i < size; ++i) {
      Rollout r = make_rollout(qid, i, fmt::format("d{}", d), u(rng), lp(rng), lp(rng));
      r.tokens.logp_old = {lp(rng)};
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace drpo::test
