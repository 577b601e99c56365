// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/batch.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "drpo/error.hpp"

namespace drpo {

void TokenSequence::validate() const {
  const std::size_t n = logp_current.size();
  if (n == 0) throw ValidationError("token sequence must contain at least one token");
  if (logp_old.size() != n || logp_ref.size() != n) {
    throw ValidationError(fmt::format("token sequence length mismatch: current {}, old {}, ref {}", n,
                                      logp_old.size(), logp_ref.size()));
  }
  if (!token_ids.empty() && token_ids.size() != n) {
    throw ValidationError(fmt::format("token_ids length {} does not match {} tokens", token_ids.size(), n));
  }
  for (const auto* list : {&logp_current, &logp_old, &logp_ref}) {
    for (const double v : *list) {
      if (!std::isfinite(v) || v > 0.0) {
        throw ValidationError(fmt::format("log-probability {} is not finite and <= 0", v));
      }
    }
  }
}

void check_reward_consistency(const Rollout& rollout, const RewardWeights& weights) {
  if (!rollout.breakdown) return;
  const double expected = combine(*rollout.breakdown, weights);
  if (std::abs(expected - rollout.reward) > 1e-9) {
    throw ValidationError(fmt::format("rollout '{}': reward {} does not match weighted breakdown {}",
                                      rollout.rollout_id, rollout.reward, expected));
  }
}

std::size_t QuestionGroup::size() const {
  return static_cast<std::size_t>(
      std::count_if(rollouts.begin(), rollouts.end(), [](const Rollout& r) { return !r.is_greedy; }));
}

const Rollout* QuestionGroup::greedy() const {
  for (const auto& r : rollouts)
    if (r.is_greedy) return &r;
  return nullptr;
}

std::vector<double> QuestionGroup::sampled_rewards() const {
  std::vector<double> out;
  out.reserve(rollouts.size());
  for (const auto& r : rollouts)
    if (!r.is_greedy) out.push_back(r.reward);
  return out;
}

std::size_t IterationBatch::question_count() const {
  std::size_t n = 0;
  for (const auto& [_, d] : domains) n += d.groups.size();
  return n;
}

std::size_t IterationBatch::rollout_count() const {
  std::size_t n = 0;
  for (const auto& [_, d] : domains)
    for (const auto& g : d.groups) n += g.rollouts.size();
  return n;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (const double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

IterationBatch build_iteration_batch(std::vector<Rollout> rollouts, std::int64_t iteration) {
  std::set<std::string> seen_ids;
  for (const auto& r : rollouts) {
    if (r.question_id.empty()) throw ValidationError(fmt::format("rollout '{}' has an empty question id", r.rollout_id));
    if (r.domain.empty()) {
      throw ValidationError(fmt::format("question '{}': rollout '{}' has an empty domain id", r.question_id, r.rollout_id));
    }
    if (!std::isfinite(r.reward)) {
      throw ValidationError(fmt::format("question '{}': rollout '{}' has a non-finite reward", r.question_id, r.rollout_id));
    }
    if (!seen_ids.insert(r.rollout_id).second) {
      throw ValidationError(fmt::format("duplicate rollout id '{}'", r.rollout_id));
    }
  }

  std::sort(rollouts.begin(), rollouts.end(), [](const Rollout& a, const Rollout& b) {
    if (a.question_id != b.question_id) return a.question_id < b.question_id;
    return a.rollout_id < b.rollout_id;
  });

  IterationBatch batch;
  batch.iteration = iteration;
  std::optional<std::size_t> group_size;
  std::size_t i = 0;
  while (i < rollouts.size()) {
    QuestionGroup group;
    group.question_id = rollouts[i].question_id;
    group.domain = rollouts[i].domain;
    for (; i < rollouts.size() && rollouts[i].question_id == group.question_id; ++i) {
      if (rollouts[i].domain != group.domain) {
        throw ValidationError(fmt::format("question '{}' has rollouts tagged with domains '{}' and '{}'",
                                          group.question_id, group.domain, rollouts[i].domain));
      }
      group.rollouts.push_back(std::move(rollouts[i]));
    }
    const std::size_t greedy_count = group.rollouts.size() - group.size();
    if (greedy_count > 1) {
      throw ValidationError(fmt::format("question '{}' has {} greedy rollouts, expected at most one",
                                        group.question_id, greedy_count));
    }
    if (group.size() < 2) {
      throw ValidationError(fmt::format("question '{}' has {} sampled rollout(s); groups need at least 2",
                                        group.question_id, group.size()));
    }
    if (group_size && *group_size != group.size()) {
      throw ValidationError(fmt::format("question '{}' has {} sampled rollouts but the batch group size is {}",
                                        group.question_id, group.size(), *group_size));
    }
    group_size = group.size();
    auto& domain = batch.domains[group.domain];
    domain.domain = group.domain;
    domain.groups.push_back(std::move(group));
  }
  batch.group_size = group_size.value_or(0);

  for (auto& [_, domain] : batch.domains) {
    std::vector<double> rewards;
    for (const auto& g : domain.groups) {
      const auto r = g.sampled_rewards();
      rewards.insert(rewards.end(), r.begin(), r.end());
    }
    domain.mean_reward = mean(rewards);
  }
  return batch;
}

}  // namespace drpo
