// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "drpo/advantage.hpp"
#include "drpo/batch.hpp"
#include "drpo/metrics.hpp"
#include "drpo/objective.hpp"
#include "drpo/random.hpp"
#include "drpo/rewards.hpp"

namespace drpo {

/// One synthetic data source. Each question has a single gold label drawn
/// uniformly from the domain's vocabulary; its features are the label's
/// prototype plus Gaussian noise with std difficulty * noise_scale.
struct DomainSpec {
  std::string id;
  double prevalence = 1.0;
  int num_labels = 4;
  double difficulty = 0.2;
  /// Side of the square mask grid. Label j owns the j-th vertical strip of the
  /// middle half of the grid; a predicted label emits that strip as its box.
  int grid_size = 16;

  bool operator==(const DomainSpec&) const = default;
};

struct EnvironmentSpec {
  std::vector<DomainSpec> domains;
  int feature_dim = 8;
  double noise_scale = 0.5;
  /// Seeds the label prototypes, independent of the training seed.
  std::uint64_t prototype_seed = 42;

  void validate() const;
  bool operator==(const EnvironmentSpec&) const = default;
};

std::string label_name(int label);
Box label_region(const DomainSpec& domain, int label);

struct SyntheticQuestion {
  std::string question_id;
  std::string domain;
  /// Index into EnvironmentSpec::domains.
  int domain_index = 0;
  std::vector<double> features;
  int gold_label = 0;
  LabelSet gold;
  Mask gold_mask;
};

/// Deterministic synthetic question source.
class Environment {
 public:
  explicit Environment(EnvironmentSpec spec);

  const EnvironmentSpec& spec() const { return spec_; }
  const std::vector<double>& prototype(int domain, int label) const;

  /// Draws `count` i.i.d. questions with domains sampled by prevalence;
  /// deterministic in (seed, iteration).
  std::vector<SyntheticQuestion> generate_batch(int count, std::uint64_t seed, std::int64_t iteration) const;
  /// `count` questions of one domain.
  std::vector<SyntheticQuestion> generate_domain(int domain, int count, std::uint64_t seed) const;

 private:
  SyntheticQuestion make_question(int domain, std::string id, Rng& rng) const;

  EnvironmentSpec spec_;
  std::vector<double> prevalence_;
  /// [domain][label] -> prototype vector.
  std::vector<std::vector<std::vector<double>>> prototypes_;
};

/// Per-domain logistic policy: each label is an independent Bernoulli decision
/// with probability sigmoid(w_label . x + b_label).
class ToyPolicy {
 public:
  ToyPolicy() = default;
  explicit ToyPolicy(const EnvironmentSpec& spec);

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Affine score of `label` in `domain` for features x.
  double score(int domain, int label, std::span<const double> x) const;
  double probability(int domain, int label, std::span<const double> x) const;
  /// Log-probability of taking decision `token` (1 = predict the label).
  double decision_logp(int domain, int label, std::span<const double> x, int token) const;
  /// Adds scale * d decision_logp / d theta into grad.
  void accumulate_decision_gradient(int domain, int label, std::span<const double> x, int token, double scale,
                                    std::span<double> grad) const;

  /// Greedy multi-label prediction (probability > 0.5).
  LabelSet predict(const SyntheticQuestion& question) const;

  bool operator==(const ToyPolicy&) const = default;

 private:
  std::size_t offset(int domain, int label) const;

  int feature_dim_ = 0;
  std::vector<int> num_labels_;
  std::vector<std::size_t> domain_offsets_;
  std::vector<double> params_;
};

/// Current, old (sampling) and reference policies.
struct PolicySnapshots {
  ToyPolicy current;
  ToyPolicy old;
  ToyPolicy reference;
};

/// Adapts a ToyPolicy to the TokenPolicy interface for the questions of one batch.
class ToyTokenPolicy : public TokenPolicy {
 public:
  ToyTokenPolicy(const ToyPolicy& policy, std::span<const SyntheticQuestion> questions);

  std::size_t parameter_count() const override { return policy_.parameter_count(); }
  double token_logp(const Rollout& rollout, std::size_t k) const override;
  void accumulate_logp_gradient(const Rollout& rollout, std::size_t k, double scale,
                                std::span<double> grad) const override;

 private:
  const SyntheticQuestion& question(const Rollout& rollout) const;

  const ToyPolicy& policy_;
  std::unordered_map<std::string, const SyntheticQuestion*> questions_;
};

/// Builds the prediction (labels plus one region box per label) for a vector
/// of per-label decisions.
Prediction decisions_to_prediction(const DomainSpec& domain, const std::vector<int>& decisions);

/// Samples `group_size` rollouts from the old policy; each label decision is
/// one token with log-probs recorded under all three policies. With
/// `with_greedy`, one extra greedy rollout is appended and flagged.
QuestionGroup rollout_group(const Environment& env, const PolicySnapshots& policies,
                            const SyntheticQuestion& question, int group_size, std::uint64_t seed,
                            const RewardWeights& weights, bool with_greedy = false);

struct TrainConfig {
  EnvironmentSpec environment;
  Estimator estimator = Estimator::kGrpo;
  RewardWeights weights;
  AdvantageConfig advantage;
  ObjectiveConfig objective;
  int group_size = 5;
  int questions_per_iteration = 512;
  int iterations = 300;
  double learning_rate = 1e-6;
  /// Held-out questions per domain.
  int eval_questions = 200;
  /// Evaluate every n iterations (and always after the last one).
  int eval_interval = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceRow {
  std::int64_t iteration = 0;
  std::string domain;
  double balanced_accuracy = 0.0;
  double macro_f1 = 0.0;
  /// Mean sampled reward of the domain in this iteration's batch (NaN if absent).
  double mean_reward = 0.0;
  /// Mean |advantage| of the domain's sampled rollouts (NaN if absent).
  double mean_abs_advantage = 0.0;
};

struct StepResult {
  IterationBatch batch;
  AdvantageTensor advantages;
  std::vector<double> gradient;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// One sample / score / advantage / ascent iteration. The parameter update is
  /// learning_rate * lr_scale * gradient.
  StepResult step(double lr_scale = 1.0);
  /// Metrics of the greedy current policy on the held-out questions.
  DomainReport evaluate() const;

  std::int64_t iteration() const { return iteration_; }
  const PolicySnapshots& policies() const { return policies_; }
  const Environment& environment() const { return env_; }
  const TrainConfig& config() const { return config_; }

 private:
  TrainConfig config_;
  Environment env_;
  PolicySnapshots policies_;
  std::vector<std::vector<SyntheticQuestion>> eval_sets_;
  std::int64_t iteration_ = 0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  DomainReport initial;
  DomainReport final;
  ToyPolicy policy;
};

/// Runs the full loop; aborts with RuntimeError when any parameter exceeds 1e6 in magnitude.
TrainResult train(const TrainConfig& config);

/// Three domains with prevalence 0.80 / 0.15 / 0.05 and difficulty 0.2 / 0.5 / 0.8.
EnvironmentSpec imbalanced_environment();

}  // namespace drpo
