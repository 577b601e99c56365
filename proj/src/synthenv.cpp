// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/synthenv.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "drpo/error.hpp"

namespace drpo {

namespace {

constexpr double kDivergenceLimit = 1e6;

/// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void EnvironmentSpec::validate() const {
  if (domains.empty()) throw ValidationError("environment needs at least one domain");
  if (feature_dim < 1) throw ValidationError(fmt::format("feature_dim must be >= 1, got {}", feature_dim));
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError(fmt::format("noise_scale must be finite and >= 0, got {}", noise_scale));
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const auto& d = domains[i];
    const std::string where = fmt::format("domains[{}]", i);
    if (d.id.empty()) throw ValidationError(where + ".id: must be a nonempty string");
    if (!ids.insert(d.id).second) throw ValidationError(fmt::format("{}.id: duplicate domain '{}'", where, d.id));
    if (!(d.prevalence > 0.0) || !std::isfinite(d.prevalence)) {
      throw ValidationError(fmt::format("{}.prevalence: must be positive, got {}", where, d.prevalence));
    }
    if (d.num_labels < 2) throw ValidationError(fmt::format("{}.labels: must be >= 2, got {}", where, d.num_labels));
    if (!(d.difficulty >= 0.0 && d.difficulty <= 1.0)) {
      throw ValidationError(fmt::format("{}.difficulty: must lie in [0, 1], got {}", where, d.difficulty));
    }
    if (d.grid_size < d.num_labels) {
      throw ValidationError(fmt::format("{}.grid_size: must be >= labels ({}), got {}", where, d.num_labels,
                                        d.grid_size));
    }
  }
}

std::string label_name(int label) { return fmt::format("label{}", label); }

Box label_region(const DomainSpec& domain, int label) {
  const double g = domain.grid_size;
  const double strip = g / domain.num_labels;
  return {label * strip, g / 4.0, strip, g / 2.0};
}

Environment::Environment(EnvironmentSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  double total = 0.0;
  for (const auto& d : spec_.domains) total += d.prevalence;
  for (const auto& d : spec_.domains) prevalence_.push_back(d.prevalence / total);

  for (std::size_t g = 0; g < spec_.domains.size(); ++g) {
    Rng rng(derive_seed(spec_.prototype_seed, g));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> labels;
    for (int l = 0; l < spec_.domains[g].num_labels; ++l) {
      std::vector<double> p(static_cast<std::size_t>(spec_.feature_dim));
      for (auto& x : p) x = normal(rng);
      labels.push_back(std::move(p));
    }
    prototypes_.push_back(std::move(labels));
  }
}

const std::vector<double>& Environment::prototype(int domain, int label) const {
  return prototypes_.at(static_cast<std::size_t>(domain)).at(static_cast<std::size_t>(label));
}

SyntheticQuestion Environment::make_question(int domain, std::string id, Rng& rng) const {
  const DomainSpec& spec = spec_.domains[static_cast<std::size_t>(domain)];
  std::uniform_int_distribution<int> pick_label(0, spec.num_labels - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticQuestion q;
  q.question_id = std::move(id);
  q.domain = spec.id;
  q.domain_index = domain;
  q.gold_label = pick_label(rng);
  q.features = prototype(domain, q.gold_label);
  const double noise = spec.difficulty * spec_.noise_scale;
  for (auto& x : q.features) x += noise * normal(rng);
  q.gold.insert(label_name(q.gold_label));
  q.gold_mask = Mask(spec.grid_size, spec.grid_size);
  q.gold_mask.fill_box(label_region(spec, q.gold_label));
  return q;
}

std::vector<SyntheticQuestion> Environment::generate_batch(int count, std::uint64_t seed,
                                                           std::int64_t iteration) const {
  if (count < 0) throw ValidationError(fmt::format("question count must be >= 0, got {}", count));
  Rng rng(derive_seed(seed, iteration, 0xB47C));
  std::discrete_distribution<int> pick_domain(prevalence_.begin(), prevalence_.end());
  std::vector<SyntheticQuestion> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int domain = pick_domain(rng);
    out.push_back(make_question(domain, fmt::format("t{:05d}-q{:05d}", iteration, i), rng));
  }
  return out;
}

std::vector<SyntheticQuestion> Environment::generate_domain(int domain, int count, std::uint64_t seed) const {
  if (domain < 0 || static_cast<std::size_t>(domain) >= spec_.domains.size()) {
    throw ValidationError(fmt::format("domain index {} out of range", domain));
  }
  Rng rng(derive_seed(seed, domain, 0xE7A1));
  std::vector<SyntheticQuestion> out;
  const auto& id = spec_.domains[static_cast<std::size_t>(domain)].id;
  for (int i = 0; i < count; ++i) out.push_back(make_question(domain, fmt::format("eval-{}-{:05d}", id, i), rng));
  return out;
}

ToyPolicy::ToyPolicy(const EnvironmentSpec& spec) : feature_dim_(spec.feature_dim) {
  std::size_t offset = 0;
  for (const auto& d : spec.domains) {
    domain_offsets_.push_back(offset);
    num_labels_.push_back(d.num_labels);
    offset += static_cast<std::size_t>(d.num_labels) * static_cast<std::size_t>(feature_dim_ + 1);
  }
  params_.assign(offset, 0.0);
}

std::size_t ToyPolicy::offset(int domain, int label) const {
  return domain_offsets_.at(static_cast<std::size_t>(domain)) +
         static_cast<std::size_t>(label) * static_cast<std::size_t>(feature_dim_ + 1);
}

double ToyPolicy::score(int domain, int label, std::span<const double> x) const {
  const std::size_t o = offset(domain, label);
  double z = params_[o + static_cast<std::size_t>(feature_dim_)];  // bias
  for (std::size_t j = 0; j < x.size(); ++j) z += params_[o + j] * x[j];
  return z;
}

double ToyPolicy::probability(int domain, int label, std::span<const double> x) const {
  return sigmoid(score(domain, label, x));
}

double ToyPolicy::decision_logp(int domain, int label, std::span<const double> x, int token) const {
  const double z = score(domain, label, x);
  return token != 0 ? log_sigmoid(z) : log_sigmoid(-z);
}

void ToyPolicy::accumulate_decision_gradient(int domain, int label, std::span<const double> x, int token,
                                             double scale, std::span<double> grad) const {
  const double p = probability(domain, label, x);
  const double dz = scale * (token != 0 ? 1.0 - p : -p);
  const std::size_t o = offset(domain, label);
  for (std::size_t j = 0; j < x.size(); ++j) grad[o + j] += dz * x[j];
  grad[o + static_cast<std::size_t>(feature_dim_)] += dz;
}

LabelSet ToyPolicy::predict(const SyntheticQuestion& question) const {
  LabelSet out;
  const int labels = num_labels_.at(static_cast<std::size_t>(question.domain_index));
  for (int l = 0; l < labels; ++l)
    if (score(question.domain_index, l, question.features) > 0.0) out.insert(label_name(l));
  return out;
}

ToyTokenPolicy::ToyTokenPolicy(const ToyPolicy& policy, std::span<const SyntheticQuestion> questions)
    : policy_(policy) {
  for (const auto& q : questions) questions_.emplace(q.question_id, &q);
}

const SyntheticQuestion& ToyTokenPolicy::question(const Rollout& rollout) const {
  const auto it = questions_.find(rollout.question_id);
  if (it == questions_.end()) throw ValidationError(fmt::format("unknown question '{}'", rollout.question_id));
  return *it->second;
}

double ToyTokenPolicy::token_logp(const Rollout& rollout, std::size_t k) const {
  const auto& q = question(rollout);
  return policy_.decision_logp(q.domain_index, static_cast<int>(k), q.features, rollout.tokens.token_ids.at(k));
}

void ToyTokenPolicy::accumulate_logp_gradient(const Rollout& rollout, std::size_t k, double scale,
                                              std::span<double> grad) const {
  const auto& q = question(rollout);
  policy_.accumulate_decision_gradient(q.domain_index, static_cast<int>(k), q.features,
                                       rollout.tokens.token_ids.at(k), scale, grad);
}

Prediction decisions_to_prediction(const DomainSpec& domain, const std::vector<int>& decisions) {
  Prediction pred;
  for (std::size_t l = 0; l < decisions.size(); ++l) {
    if (decisions[l] == 0) continue;
    const std::string name = label_name(static_cast<int>(l));
    pred.labels.insert(name);
    pred.boxes[name].push_back(label_region(domain, static_cast<int>(l)));
  }
  return pred;
}

QuestionGroup rollout_group(const Environment& env, const PolicySnapshots& policies,
                            const SyntheticQuestion& question, int group_size, std::uint64_t seed,
                            const RewardWeights& weights, bool with_greedy) {
  if (group_size < 2) throw ValidationError(fmt::format("group size must be >= 2, got {}", group_size));
  const DomainSpec& domain = env.spec().domains.at(static_cast<std::size_t>(question.domain_index));
  const int labels = domain.num_labels;
  const int g = question.domain_index;

  std::vector<double> p_sample(static_cast<std::size_t>(labels));
  for (int l = 0; l < labels; ++l) p_sample[static_cast<std::size_t>(l)] = policies.old.probability(g, l, question.features);

  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuestionGroup group;
  group.question_id = question.question_id;
  group.domain = question.domain;
  const int total = group_size + (with_greedy ? 1 : 0);
  for (int i = 0; i < total; ++i) {
    const bool greedy = i == group_size;
    std::vector<int> decisions(static_cast<std::size_t>(labels));
    for (int l = 0; l < labels; ++l) {
      const double p = p_sample[static_cast<std::size_t>(l)];
      decisions[static_cast<std::size_t>(l)] = greedy ? (p > 0.5 ? 1 : 0) : (u(rng) < p ? 1 : 0);
    }
    Rollout r;
    r.rollout_id = fmt::format("{}-r{:02d}", question.question_id, i);
    r.question_id = question.question_id;
    r.domain = question.domain;
    r.is_greedy = greedy;
    r.tokens.token_ids = decisions;
    for (int l = 0; l < labels; ++l) {
      const int token = decisions[static_cast<std::size_t>(l)];
      r.tokens.logp_current.push_back(policies.current.decision_logp(g, l, question.features, token));
      r.tokens.logp_old.push_back(policies.old.decision_logp(g, l, question.features, token));
      r.tokens.logp_ref.push_back(policies.reference.decision_logp(g, l, question.features, token));
    }
    r.prediction = decisions_to_prediction(domain, decisions);
    r.breakdown = score_prediction(r.prediction, question.gold, question.gold_mask);
    r.reward = combine(*r.breakdown, weights);
    group.rollouts.push_back(std::move(r));
  }
  return group;
}

void TrainConfig::validate() const {
  environment.validate();
  weights.validate();
  advantage.validate();
  objective.validate();
  if (group_size < 2) throw ValidationError(fmt::format("environment.group_size: must be >= 2, got {}", group_size));
  if (questions_per_iteration < 1) {
    throw ValidationError(fmt::format("environment.questions_per_iteration: must be >= 1, got {}",
                                      questions_per_iteration));
  }
  if (iterations < 0) throw ValidationError(fmt::format("environment.iterations: must be >= 0, got {}", iterations));
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError(fmt::format("environment.learning_rate: must be positive, got {}", learning_rate));
  }
  if (eval_questions < 1) {
    throw ValidationError(fmt::format("environment.eval_questions: must be >= 1, got {}", eval_questions));
  }
  if (eval_interval < 1) {
    throw ValidationError(fmt::format("environment.eval_interval: must be >= 1, got {}", eval_interval));
  }
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)), env_(config_.environment) {
  config_.validate();
  policies_.current = ToyPolicy(config_.environment);
  policies_.old = policies_.current;
  policies_.reference = policies_.current;
  for (std::size_t d = 0; d < config_.environment.domains.size(); ++d) {
    eval_sets_.push_back(env_.generate_domain(static_cast<int>(d), config_.eval_questions,
                                              derive_seed(config_.seed, 0xE7A1)));
  }
}

StepResult Trainer::step(double lr_scale) {
  const std::int64_t t = iteration_ + 1;
  const std::vector<SyntheticQuestion> questions =
      env_.generate_batch(config_.questions_per_iteration, config_.seed, t);
  const bool greedy = config_.estimator == Estimator::kReMax;

  std::vector<Rollout> rollouts;
  rollouts.reserve(questions.size() * static_cast<std::size_t>(config_.group_size + 1));
  for (std::size_t i = 0; i < questions.size(); ++i) {
    QuestionGroup g = rollout_group(env_, policies_, questions[i], config_.group_size,
                                    derive_seed(config_.seed, t, i, 0x5A3F), config_.weights, greedy);
    for (auto& r : g.rollouts) rollouts.push_back(std::move(r));
  }

  StepResult out;
  out.batch = build_iteration_batch(std::move(rollouts), t);
  out.advantages = compute_advantages(out.batch, config_.estimator, config_.advantage,
                                      derive_seed(config_.seed, t, 0xAD7A));
  const ToyTokenPolicy token_policy(policies_.current, questions);
  out.gradient = objective_gradient(token_policy, out.batch, out.advantages, config_.objective);

  const double step_size = config_.learning_rate * lr_scale;
  auto params = policies_.current.parameters();
  for (std::size_t j = 0; j < params.size(); ++j) {
    params[j] += step_size * out.gradient[j];
    if (!(std::abs(params[j]) <= kDivergenceLimit)) {
      throw RuntimeError(fmt::format("training diverged at iteration {}: parameter {} = {}", t, j, params[j]));
    }
  }
  policies_.old = policies_.current;
  iteration_ = t;
  return out;
}

DomainReport Trainer::evaluate() const {
  std::map<std::string, std::vector<DatasetMetrics>> by_domain;
  for (const auto& set : eval_sets_) {
    std::vector<LabeledSample> samples;
    samples.reserve(set.size());
    for (const auto& q : set) samples.push_back({policies_.current.predict(q), q.gold});
    by_domain[set.front().domain].push_back(evaluate_dataset(samples));
  }
  return domain_report(by_domain);
}

TrainResult train(const TrainConfig& config) {
  Trainer trainer(config);
  TrainResult result;
  result.initial = trainer.evaluate();
  result.final = result.initial;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int t = 1; t <= config.iterations; ++t) {
    const StepResult step = trainer.step();
    if (t % config.eval_interval != 0 && t != config.iterations) continue;
    result.final = trainer.evaluate();
    for (const auto& [domain, metrics] : result.final.domains) {
      TraceRow row;
      row.iteration = t;
      row.domain = domain;
      row.balanced_accuracy = metrics.balanced_accuracy;
      row.macro_f1 = metrics.macro_f1;
      const auto it = step.batch.domains.find(domain);
      row.mean_reward = it == step.batch.domains.end() ? nan : it->second.mean_reward;
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& e : step.advantages.entries) {
        if (e.domain != domain || e.is_greedy) continue;
        sum += std::abs(e.advantage);
        ++n;
      }
      row.mean_abs_advantage = n > 0 ? sum / static_cast<double>(n) : nan;
      result.trace.push_back(row);
    }
  }
  result.policy = trainer.policies().current;
  return result;
}

EnvironmentSpec imbalanced_environment() {
  EnvironmentSpec spec;
  spec.domains = {
      {"common", 0.80, 4, 0.2, 16},
      {"uncommon", 0.15, 4, 0.5, 16},
      {"rare", 0.05, 4, 0.8, 16},
  };
  return spec;
}

}  // namespace drpo
