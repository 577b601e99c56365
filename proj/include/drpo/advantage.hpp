// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drpo/batch.hpp"
#include "drpo/clustering.hpp"

namespace drpo {

enum class Estimator {
  kGrpo,
  kDrpo,
  kDrpoDomainOnly,
  kDrpoNoKl,
  kRloo,
  kReinforcePP,
  kReMax,
  kReinforce,
};

std::string_view to_string(Estimator estimator);
/// Accepts the CLI names: grpo, drpo, drpo-domain-only, drpo-nokl, rloo,
/// reinforce-pp, remax, reinforce.
Estimator parse_estimator(std::string_view name);
bool is_drpo(Estimator estimator);

struct KlDampingConfig {
  double percentile = 0.9;
  bool enabled = true;

  bool operator==(const KlDampingConfig&) const = default;
};

struct AdvantageConfig {
  /// Added to the group standard deviation in the question-level normalization.
  double epsilon = 1e-4;
  /// Lower bound on every temperature factor.
  double temperature_floor = 1e-4;
  ElbowConfig elbow;
  KlDampingConfig damping;

  void validate() const;
  bool operator==(const AdvantageConfig&) const = default;
};

/// Every intermediate of one rollout's advantage. `replay_advantage` recomputes
/// the advantage from these fields and the rollout reward alone.
struct AdvantageDiagnostics {
  double group_mean = 0.0;
  /// Population std of the sampled group rewards (without epsilon).
  double group_std = 0.0;
  /// Value subtracted from the reward.
  double baseline = 0.0;
  /// Divisor applied after subtracting the baseline; 0 zeroes the advantage.
  double scale = 1.0;
  double t_domain = 1.0;
  double t_cluster = 1.0;
  int cluster = 0;
  /// Question-level KL aggregate used by the damping factor.
  double question_kl = 0.0;
  /// KL damping factor m in (0, 1].
  double m = 1.0;
  /// Final batch-wide divisor; 0 zeroes the advantage.
  double batch_std = 1.0;
};

double replay_advantage(double reward, const AdvantageDiagnostics& diag);

struct AdvantageEntry {
  std::string rollout_id;
  std::string question_id;
  std::string domain;
  double reward = 0.0;
  double advantage = 0.0;
  bool is_greedy = false;
  AdvantageDiagnostics diagnostics;
};

struct TemperatureFactors {
  std::map<std::string, double> domain;
  /// Per domain, indexed by cluster.
  std::map<std::string, std::vector<double>> cluster;
  double floor = 1e-4;
};

/// Per-rollout advantages in canonical batch order (domains, then questions,
/// then rollout ids).
struct AdvantageTensor {
  Estimator estimator = Estimator::kGrpo;
  std::vector<AdvantageEntry> entries;
  TemperatureFactors temperatures;
  std::map<std::string, ClusterModel> clusters;
  double batch_std = 1.0;
  /// 90th (or configured) percentile of s' * k used by the damping factor.
  double damping_threshold = 0.0;

  const AdvantageEntry* find(const std::string& rollout_id) const;
  std::vector<double> values() const;
  /// Rebuilds the rollout-id lookup after `entries` changes.
  void reindex();

 private:
  std::map<std::string, std::size_t> index_;
};

/// max(sqrt(n) * mean, floor).
double temperature(std::size_t count, double mean_reward, double floor);

/// (r - mean) / (std + epsilon) per sampled rollout of each group; groups
/// with zero spread get zero advantage.
AdvantageTensor grpo_advantages(const IterationBatch& batch, double epsilon);

std::map<std::string, double> domain_temperatures(const IterationBatch& batch, double floor);

/// One temperature per cluster of `model`, which must cover exactly the
/// domain's questions.
std::vector<double> cluster_temperatures(const DomainBatch& domain, const ClusterModel& model, double floor);

/// Sum over tokens of exp(logp_current) * (logp_current - logp_ref).
double rollout_kl(const TokenSequence& tokens);

struct QuestionKl {
  /// Aligned with QuestionGroup::rollouts.
  std::vector<double> per_rollout;
  /// Sum over sampled rollouts.
  double total = 0.0;
};
QuestionKl question_kl(const QuestionGroup& group);

/// Percentile with linear interpolation between order statistics; p in [0, 1].
double percentile(std::vector<double> values, double p);

struct DampingResult {
  std::vector<double> m;
  double threshold = 0.0;
};
/// m_i = t / (t + max(s'_i k_i, 0)) with t the configured percentile of
/// {s'_i k_i}; every m_i = 1 when t <= 0 or damping is disabled.
DampingResult kl_damping(std::span<const double> pre_scaled, std::span<const double> kl, const KlDampingConfig& config);

/// Hierarchical domain- and cluster-aware scaling of the GRPO advantages.
/// `estimator` selects the variant: kDrpo (clusters + damping),
/// kDrpoDomainOnly (cluster temperatures fixed to 1, no damping) or kDrpoNoKl
/// (clusters, no damping).
AdvantageTensor drpo_advantages(const IterationBatch& batch, const AdvantageConfig& config, Estimator estimator,
                                std::uint64_t seed);

/// RLOO, Reinforce++, ReMax and REINFORCE comparison baselines.
AdvantageTensor baseline_advantages(const IterationBatch& batch, Estimator method);

/// Dispatches on the estimator.
AdvantageTensor compute_advantages(const IterationBatch& batch, Estimator estimator, const AdvantageConfig& config,
                                   std::uint64_t seed);

}  // namespace drpo
