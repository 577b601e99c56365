// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/advantage.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "drpo/error.hpp"
#include "drpo/random.hpp"

namespace drpo {

namespace {

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;
};

GroupStats group_stats(const std::vector<double>& rewards) {
  if (rewards.empty()) return {};
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    return {rewards.front(), 0.0};
  }
  return {mean(rewards), population_std(rewards)};
}

/// Question-level normalized reward, divided by both temperatures and damped.
double scaled_value(double reward, const AdvantageDiagnostics& d) {
  const double s = d.scale > 0.0 ? (reward - d.baseline) / d.scale : 0.0;
  const double pre_scaled = s / (d.t_domain * d.t_cluster);
  return d.m * pre_scaled;
}

double pre_scaled_value(double reward, const AdvantageDiagnostics& d) {
  const double s = d.scale > 0.0 ? (reward - d.baseline) / d.scale : 0.0;
  return s / (d.t_domain * d.t_cluster);
}

/// Entries for every rollout, with GRPO group statistics filled in.
std::vector<AdvantageEntry> grpo_entries(const IterationBatch& batch, double epsilon) {
  std::vector<AdvantageEntry> entries;
  entries.reserve(batch.rollout_count());
  for (const auto& [domain_id, domain] : batch.domains) {
    for (const auto& group : domain.groups) {
      const GroupStats stats = group_stats(group.sampled_rewards());
      for (const auto& r : group.rollouts) {
        AdvantageEntry e;
        e.rollout_id = r.rollout_id;
        e.question_id = group.question_id;
        e.domain = domain_id;
        e.reward = r.reward;
        e.is_greedy = r.is_greedy;
        e.diagnostics.group_mean = stats.mean;
        e.diagnostics.group_std = stats.std;
        e.diagnostics.baseline = stats.mean;
        e.diagnostics.scale = (stats.std > 0.0 && !r.is_greedy) ? stats.std + epsilon : 0.0;
        entries.push_back(std::move(e));
      }
    }
  }
  return entries;
}

AdvantageTensor finish(Estimator estimator, std::vector<AdvantageEntry> entries) {
  AdvantageTensor out;
  out.estimator = estimator;
  for (auto& e : entries) e.advantage = replay_advantage(e.reward, e.diagnostics);
  out.entries = std::move(entries);
  out.reindex();
  return out;
}

}  // namespace

std::string_view to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::kGrpo: return "grpo";
    case Estimator::kDrpo: return "drpo";
    case Estimator::kDrpoDomainOnly: return "drpo-domain-only";
    case Estimator::kDrpoNoKl: return "drpo-nokl";
    case Estimator::kRloo: return "rloo";
    case Estimator::kReinforcePP: return "reinforce-pp";
    case Estimator::kReMax: return "remax";
    case Estimator::kReinforce: return "reinforce";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name) {
  for (const Estimator e : {Estimator::kGrpo, Estimator::kDrpo, Estimator::kDrpoDomainOnly, Estimator::kDrpoNoKl,
                            Estimator::kRloo, Estimator::kReinforcePP, Estimator::kReMax, Estimator::kReinforce}) {
    if (to_string(e) == name) return e;
  }
  throw ValidationError(fmt::format("unknown estimator '{}'", name));
}

bool is_drpo(Estimator estimator) {
  return estimator == Estimator::kDrpo || estimator == Estimator::kDrpoDomainOnly ||
         estimator == Estimator::kDrpoNoKl;
}

void AdvantageConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError(fmt::format("epsilon must be finite and >= 0, got {}", epsilon));
  }
  if (!(temperature_floor > 0.0) || !std::isfinite(temperature_floor)) {
    throw ValidationError(fmt::format("temperature floor must be finite and > 0, got {}", temperature_floor));
  }
  if (!(damping.percentile > 0.0 && damping.percentile < 1.0)) {
    throw ValidationError(fmt::format("damping percentile must lie in (0, 1), got {}", damping.percentile));
  }
  if (!(elbow.tolerance > 0.0 && elbow.tolerance < 1.0)) {
    throw ValidationError(fmt::format("elbow tolerance must lie in (0, 1), got {}", elbow.tolerance));
  }
  if (elbow.max_clusters < 1) {
    throw ValidationError(fmt::format("max_clusters must be >= 1, got {}", elbow.max_clusters));
  }
}

double replay_advantage(double reward, const AdvantageDiagnostics& diag) {
  const double s_scaled = scaled_value(reward, diag);
  return diag.batch_std > 0.0 ? s_scaled / diag.batch_std : 0.0;
}

const AdvantageEntry* AdvantageTensor::find(const std::string& rollout_id) const {
  const auto it = index_.find(rollout_id);
  return it == index_.end() ? nullptr : &entries[it->second];
}

std::vector<double> AdvantageTensor::values() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.advantage);
  return out;
}

void AdvantageTensor::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < entries.size(); ++i) index_[entries[i].rollout_id] = i;
}

double temperature(std::size_t count, double mean_reward, double floor) {
  return std::max(std::sqrt(static_cast<double>(count)) * mean_reward, floor);
}

AdvantageTensor grpo_advantages(const IterationBatch& batch, double epsilon) {
  if (!(epsilon >= 0.0)) throw ValidationError(fmt::format("epsilon must be >= 0, got {}", epsilon));
  return finish(Estimator::kGrpo, grpo_entries(batch, epsilon));
}

std::map<std::string, double> domain_temperatures(const IterationBatch& batch, double floor) {
  std::map<std::string, double> out;
  for (const auto& [id, domain] : batch.domains) out[id] = temperature(domain.question_count(), domain.mean_reward, floor);
  return out;
}

std::vector<double> cluster_temperatures(const DomainBatch& domain, const ClusterModel& model, double floor) {
  if (model.assignments.size() != domain.groups.size()) {
    throw ValidationError(fmt::format("cluster model covers {} questions but domain '{}' has {}",
                                      model.assignments.size(), domain.domain, domain.groups.size()));
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(model.k), 0);
  std::vector<double> sums(static_cast<std::size_t>(model.k), 0.0);
  std::vector<std::size_t> rollouts(static_cast<std::size_t>(model.k), 0);
  for (std::size_t q = 0; q < domain.groups.size(); ++q) {
    if (!model.question_ids.empty() && model.question_ids[q] != domain.groups[q].question_id) {
      throw ValidationError(fmt::format("cluster model question '{}' does not match domain question '{}'",
                                        model.question_ids[q], domain.groups[q].question_id));
    }
    const auto c = static_cast<std::size_t>(model.assignments[q]);
    ++counts[c];
    for (const double r : domain.groups[q].sampled_rewards()) {
      sums[c] += r;
      ++rollouts[c];
    }
  }
  std::vector<double> out(static_cast<std::size_t>(model.k));
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double mu = rollouts[c] > 0 ? sums[c] / static_cast<double>(rollouts[c]) : 0.0;
    out[c] = temperature(counts[c], mu, floor);
  }
  return out;
}

double rollout_kl(const TokenSequence& tokens) {
  tokens.validate();
  double kl = 0.0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const double lc = tokens.logp_current[k];
    kl += std::exp(lc) * (lc - tokens.logp_ref[k]);
  }
  return kl;
}

QuestionKl question_kl(const QuestionGroup& group) {
  QuestionKl out;
  out.per_rollout.reserve(group.rollouts.size());
  for (const auto& r : group.rollouts) {
    const double kl = rollout_kl(r.tokens);
    out.per_rollout.push_back(kl);
    if (!r.is_greedy) out.total += kl;
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(fmt::format("percentile {} outside [0, 1]", p));
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

DampingResult kl_damping(std::span<const double> pre_scaled, std::span<const double> kl,
                         const KlDampingConfig& config) {
  if (pre_scaled.size() != kl.size()) {
    throw ValidationError(fmt::format("damping inputs differ in length ({} vs {})", pre_scaled.size(), kl.size()));
  }
  if (pre_scaled.empty()) throw ValidationError("damping needs at least one rollout");
  if (!(config.percentile > 0.0 && config.percentile < 1.0)) {
    throw ValidationError(fmt::format("damping percentile must lie in (0, 1), got {}", config.percentile));
  }
  DampingResult out;
  out.m.assign(pre_scaled.size(), 1.0);
  if (!config.enabled) return out;

  std::vector<double> products(pre_scaled.size());
  for (std::size_t i = 0; i < products.size(); ++i) products[i] = pre_scaled[i] * kl[i];
  out.threshold = percentile(products, config.percentile);
  if (!(out.threshold > 0.0)) return out;
  for (std::size_t i = 0; i < products.size(); ++i)
    out.m[i] = out.threshold / (out.threshold + std::max(products[i], 0.0));
  return out;
}

AdvantageTensor drpo_advantages(const IterationBatch& batch, const AdvantageConfig& config, Estimator estimator,
                                std::uint64_t seed) {
  if (!is_drpo(estimator)) {
    throw ValidationError(fmt::format("'{}' is not a DRPO variant", to_string(estimator)));
  }
  config.validate();
  std::vector<AdvantageEntry> entries = grpo_entries(batch, config.epsilon);

  TemperatureFactors temps;
  temps.floor = config.temperature_floor;
  temps.domain = domain_temperatures(batch, config.temperature_floor);
  std::map<std::string, ClusterModel> clusters;

  // Stage 1 + 2: cluster each domain's reward vectors, then assign temperatures.
  std::size_t cursor = 0;
  std::vector<double> question_kls;  // per entry; only filled when damping
  const bool damping = estimator == Estimator::kDrpo && config.damping.enabled;
  if (damping) question_kls.resize(entries.size(), 0.0);
  for (const auto& [domain_id, domain] : batch.domains) {
    std::vector<int> cluster_of(domain.groups.size(), 0);
    std::vector<double> t_cluster{1.0};
    if (estimator != Estimator::kDrpoDomainOnly) {
      std::vector<RewardVector> vectors;
      vectors.reserve(domain.groups.size());
      for (const auto& g : domain.groups) {
        RewardVector v{g.question_id, g.sampled_rewards()};
        std::sort(v.values.begin(), v.values.end(), std::greater<>());
        vectors.push_back(std::move(v));
      }
      ClusterModel model = select_k_elbow(vectors, config.elbow, derive_seed(seed, hash_string(domain_id)));
      t_cluster = cluster_temperatures(domain, model, config.temperature_floor);
      cluster_of = model.assignments;
      clusters.emplace(domain_id, std::move(model));
    }
    temps.cluster[domain_id] = t_cluster;

    const double t_domain = temps.domain.at(domain_id);
    for (std::size_t q = 0; q < domain.groups.size(); ++q) {
      const auto& group = domain.groups[q];
      const double k = damping ? question_kl(group).total : 0.0;
      for (std::size_t r = 0; r < group.rollouts.size(); ++r, ++cursor) {
        auto& d = entries[cursor].diagnostics;
        d.t_domain = t_domain;
        d.cluster = cluster_of[q];
        d.t_cluster = t_cluster[static_cast<std::size_t>(cluster_of[q])];
        d.question_kl = k;
        if (damping) question_kls[cursor] = k;
      }
    }
  }

  // KL-aware damping is computed from the pre-damping value s' = s / (T_g T_c).
  double threshold = 0.0;
  if (damping) {
    std::vector<double> pre;
    std::vector<double> kls;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].is_greedy) continue;
      pre.push_back(pre_scaled_value(entries[i].reward, entries[i].diagnostics));
      kls.push_back(question_kls[i]);
      where.push_back(i);
    }
    if (!pre.empty()) {
      const DampingResult damp = kl_damping(pre, kls, config.damping);
      threshold = damp.threshold;
      for (std::size_t j = 0; j < where.size(); ++j) entries[where[j]].diagnostics.m = damp.m[j];
    }
  }

  std::vector<double> scaled;
  scaled.reserve(entries.size());
  for (const auto& e : entries)
    if (!e.is_greedy) scaled.push_back(scaled_value(e.reward, e.diagnostics));
  const double batch_std = population_std(scaled);
  for (auto& e : entries) e.diagnostics.batch_std = batch_std;

  AdvantageTensor out = finish(estimator, std::move(entries));
  out.temperatures = std::move(temps);
  out.clusters = std::move(clusters);
  out.batch_std = batch_std;
  out.damping_threshold = threshold;
  return out;
}

AdvantageTensor baseline_advantages(const IterationBatch& batch, Estimator method) {
  if (method != Estimator::kRloo && method != Estimator::kReinforcePP && method != Estimator::kReMax &&
      method != Estimator::kReinforce) {
    throw ValidationError(fmt::format("'{}' is not a baseline estimator", to_string(method)));
  }
  std::vector<AdvantageEntry> entries = grpo_entries(batch, 0.0);

  GroupStats global;
  if (method == Estimator::kReinforcePP) {
    std::vector<double> all;
    for (const auto& e : entries)
      if (!e.is_greedy) all.push_back(e.reward);
    global = group_stats(all);
  }

  std::size_t cursor = 0;
  for (const auto& [_, domain] : batch.domains) {
    for (const auto& group : domain.groups) {
      const Rollout* greedy = group.greedy();
      if (method == Estimator::kReMax && greedy == nullptr) {
        throw ValidationError(fmt::format("question '{}' has no greedy rollout, which ReMax requires",
                                          group.question_id));
      }
      const std::vector<double> rewards = group.sampled_rewards();
      double sum = 0.0;
      for (const double r : rewards) sum += r;
      for (const auto& r : group.rollouts) {
        auto& d = entries[cursor++].diagnostics;
        d.scale = r.is_greedy ? 0.0 : 1.0;
        switch (method) {
          case Estimator::kRloo:
            d.baseline = (sum - r.reward) / static_cast<double>(rewards.size() - 1);
            break;
          case Estimator::kReinforcePP:
            d.baseline = global.mean;
            d.scale = r.is_greedy ? 0.0 : global.std;
            break;
          case Estimator::kReMax:
            d.baseline = greedy->reward;
            break;
          default:
            d.baseline = 0.0;
            break;
        }
      }
    }
  }
  return finish(method, std::move(entries));
}

AdvantageTensor compute_advantages(const IterationBatch& batch, Estimator estimator, const AdvantageConfig& config,
                                   std::uint64_t seed) {
  if (estimator == Estimator::kGrpo) {
    config.validate();
    return grpo_advantages(batch, config.epsilon);
  }
  if (is_drpo(estimator)) return drpo_advantages(batch, config, estimator, seed);
  return baseline_advantages(batch, estimator);
}

}  // namespace drpo
