// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/commands.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "drpo/error.hpp"
#include "drpo/jsonl.hpp"
#include "drpo/metrics.hpp"

namespace drpo {

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError(fmt::format("cannot write '{}'", tmp.string()));
    out << contents;
    if (!out) throw RuntimeError(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iteration,domain,balanced_accuracy,macro_f1,mean_reward,mean_abs_advantage\n";
  for (const auto& r : trace) {
    out += fmt::format("{},{},{},{},{},{}\n", r.iteration, r.domain, format_number(r.balanced_accuracy),
                       format_number(r.macro_f1), format_number(r.mean_reward),
                       format_number(r.mean_abs_advantage));
  }
  return out;
}

void run_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  write_atomically(out_dir / "config.yaml", emit_config(config));

  std::string summary = "seed,estimator,iterations,balanced_accuracy,macro_f1\n";
  for (const auto seed : config.seeds) {
    for (const Estimator estimator : config.estimators) {
      log << fmt::format("simulate: estimator {} seed {} ({} iterations)\n", to_string(estimator), seed,
                         config.iterations);
      const TrainResult result = train(config.train_config(estimator, seed));
      write_atomically(out_dir / fmt::format("trace_{}_seed{}.csv", to_string(estimator), seed),
                       trace_csv(result.trace));
      summary += fmt::format("{},{},{},{},{}\n", seed, to_string(estimator), config.iterations,
                             format_number(result.final.overall.balanced_accuracy),
                             format_number(result.final.overall.macro_f1));
    }
  }
  write_atomically(out_dir / "summary.csv", summary);
}

void run_advantages(std::istream& in, std::ostream& out, const ExperimentConfig& config) {
  config.validate();
  const std::vector<Rollout> rollouts = read_rollouts(in);
  for (const auto& r : rollouts) check_reward_consistency(r, config.weights);
  const IterationBatch batch = build_iteration_batch(rollouts);
  const AdvantageTensor adv =
      compute_advantages(batch, config.estimators.front(), config.advantage, config.seeds.front());
  write_advantages(out, rollouts, adv);
}

void run_score(std::istream& predictions, std::istream& gold, std::ostream& samples_out, std::ostream& metrics_out,
               const RewardWeights& weights) {
  weights.validate();
  const std::vector<PredictionRecord> preds = read_predictions(predictions);
  const std::vector<GoldRecord> golds = read_gold(gold);

  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.id, &p).second) throw ValidationError(fmt::format("duplicate prediction id '{}'", p.id));
  }
  std::map<std::string, bool> gold_ids;
  for (const auto& g : golds) {
    if (!gold_ids.emplace(g.id, true).second) throw ValidationError(fmt::format("duplicate gold id '{}'", g.id));
    if (!by_id.count(g.id)) throw ValidationError(fmt::format("no prediction for gold id '{}'", g.id));
  }
  for (const auto& p : preds) {
    if (!gold_ids.count(p.id)) throw ValidationError(fmt::format("prediction id '{}' has no gold record", p.id));
  }

  struct Bucket {
    std::vector<LabeledSample> samples;
    double reward_sum = 0.0;
  };
  // (domain, dataset) -> samples
  std::map<std::pair<std::string, std::string>, Bucket> buckets;
  const Mask empty_mask(1, 1);
  for (const auto& g : golds) {
    const Prediction& pred = by_id.at(g.id)->prediction;
    const RewardBreakdown parts = score_prediction(pred, g.labels, g.mask ? *g.mask : empty_mask);
    const double reward = combine(parts, weights);
    nlohmann::ordered_json rec;
    rec["id"] = g.id;
    rec["domain"] = g.domain;
    rec["dataset"] = g.dataset;
    rec["acc"] = parts.acc;
    rec["iou"] = parts.iou;
    rec["aux"] = parts.aux;
    rec["reward"] = reward;
    samples_out << rec.dump() << '\n';

    auto& b = buckets[{g.domain, g.dataset}];
    b.samples.push_back({pred.labels, g.labels});
    b.reward_sum += reward;
  }

  metrics_out << "level,domain,dataset,samples,mean_reward,balanced_accuracy,macro_f1\n";
  std::map<std::string, std::vector<DatasetMetrics>> by_domain;
  std::map<std::string, std::pair<std::size_t, double>> domain_rewards;
  std::size_t total_samples = 0;
  double total_reward = 0.0;
  for (const auto& [key, b] : buckets) {
    const DatasetMetrics m = evaluate_dataset(b.samples);
    by_domain[key.first].push_back(m);
    auto& dr = domain_rewards[key.first];
    dr.first += b.samples.size();
    dr.second += b.reward_sum;
    total_samples += b.samples.size();
    total_reward += b.reward_sum;
    metrics_out << fmt::format("dataset,{},{},{},{},{},{}\n", key.first, key.second, b.samples.size(),
                               format_number(b.reward_sum / static_cast<double>(b.samples.size())),
                               format_number(m.balanced_accuracy), format_number(m.macro_f1));
  }
  const DomainReport report = domain_report(by_domain);
  for (const auto& [domain, m] : report.domains) {
    const auto& dr = domain_rewards.at(domain);
    metrics_out << fmt::format("domain,{},,{},{},{},{}\n", domain, dr.first,
                               format_number(dr.second / static_cast<double>(dr.first)),
                               format_number(m.balanced_accuracy), format_number(m.macro_f1));
  }
  if (total_samples > 0) {
    metrics_out << fmt::format("overall,,,{},{},{},{}\n", total_samples,
                               format_number(total_reward / static_cast<double>(total_samples)),
                               format_number(report.overall.balanced_accuracy),
                               format_number(report.overall.macro_f1));
  }
}

}  // namespace drpo
