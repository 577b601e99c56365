// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drpo/rewards.hpp"

namespace drpo {

/// Per-token log-probabilities (nats) of one sampled response under the
/// current, old (sampling) and reference policies. `token_ids` identifies the
/// realized token at each position so a policy can recompute its log-prob.
struct TokenSequence {
  std::vector<double> logp_current;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<int> token_ids;

  std::size_t size() const { return logp_current.size(); }
  /// Three lists of identical length >= 1, finite and <= 0.
  void validate() const;

  bool operator==(const TokenSequence&) const = default;
};

struct Rollout {
  std::string rollout_id;
  std::string question_id;
  std::string domain;
  double reward = 0.0;
  std::optional<RewardBreakdown> breakdown;
  TokenSequence tokens;
  Prediction prediction;
  /// Greedy decode used as the ReMax baseline. Excluded from group statistics.
  bool is_greedy = false;

  bool operator==(const Rollout&) const = default;
};

/// Throws ValidationError unless the stored reward equals the weighted
/// combination of its breakdown within 1e-9. No-op without a breakdown.
void check_reward_consistency(const Rollout& rollout, const RewardWeights& weights);

struct QuestionGroup {
  std::string question_id;
  std::string domain;
  /// Sorted by rollout id; includes the greedy rollout, if any.
  std::vector<Rollout> rollouts;

  /// Number of sampled (non-greedy) rollouts.
  std::size_t size() const;
  const Rollout* greedy() const;
  std::vector<double> sampled_rewards() const;

  bool operator==(const QuestionGroup&) const = default;
};

struct DomainBatch {
  std::string domain;
  /// Sorted by question id.
  std::vector<QuestionGroup> groups;
  /// Mean reward over every sampled rollout in the domain.
  double mean_reward = 0.0;

  std::size_t question_count() const { return groups.size(); }
  bool operator==(const DomainBatch&) const = default;
};

struct IterationBatch {
  std::int64_t iteration = 0;
  /// Keyed by domain id, hence lexicographically ordered.
  std::map<std::string, DomainBatch> domains;
  /// Sampled rollouts per group; uniform across the batch.
  std::size_t group_size = 0;

  std::size_t question_count() const;
  std::size_t rollout_count() const;
  bool operator==(const IterationBatch&) const = default;
};

/// Groups rollouts by question id and domain into a canonical batch.
///
/// Rejects groups with fewer than two sampled rollouts, mixed domain tags
/// within a question, more than one greedy rollout per question, empty ids,
/// duplicate rollout ids, and non-uniform group sizes. The result does not
/// depend on the order of `rollouts`.
IterationBatch build_iteration_batch(std::vector<Rollout> rollouts, std::int64_t iteration = 0);

double mean(const std::vector<double>& values);
/// Population (divide-by-n) standard deviation.
double population_std(const std::vector<double>& values);

}  // namespace drpo
