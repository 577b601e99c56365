// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drpo/advantage.hpp"
#include "drpo/clustering.hpp"
#include "drpo/commands.hpp"
#include "drpo/config.hpp"
#include "drpo/error.hpp"
#include "drpo/metrics.hpp"
#include "drpo/objective.hpp"
#include "drpo/rewards.hpp"
#include "drpo/synthenv.hpp"

namespace py = pybind11;
using namespace drpo;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

std::vector<Box> to_boxes(const std::vector<BoxTuple>& in) {
  std::vector<Box> out;
  for (const auto& [x, y, w, h] : in) out.push_back({x, y, w, h});
  return out;
}

Mask to_mask(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw ValidationError("mask must have at least one row");
  std::vector<std::uint8_t> cells;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ValidationError("mask rows differ in length");
    for (const int v : r) cells.push_back(v != 0);
  }
  return Mask(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), std::move(cells));
}

std::vector<RewardVector> to_vectors(const std::vector<std::vector<double>>& in) {
  std::vector<RewardVector> out;
  for (std::size_t i = 0; i < in.size(); ++i) out.push_back({std::to_string(i), in[i]});
  return out;
}

py::dict model_dict(const ClusterModel& m) {
  py::dict d;
  d["k"] = m.k;
  d["centroids"] = m.centroids;
  d["assignments"] = m.assignments;
  d["inertia"] = m.inertia;
  d["inertia_by_k"] = m.inertia_by_k;
  return d;
}

Rollout to_rollout(const py::dict& d) {
  Rollout r;
  r.rollout_id = d["rollout_id"].cast<std::string>();
  r.question_id = d["question_id"].cast<std::string>();
  r.domain = d["domain"].cast<std::string>();
  r.reward = d["reward"].cast<double>();
  r.tokens.logp_current = d["logp_current"].cast<std::vector<double>>();
  r.tokens.logp_old = d.contains("logp_old") ? d["logp_old"].cast<std::vector<double>>() : r.tokens.logp_current;
  r.tokens.logp_ref = d.contains("logp_ref") ? d["logp_ref"].cast<std::vector<double>>() : r.tokens.logp_current;
  if (d.contains("is_greedy")) r.is_greedy = d["is_greedy"].cast<bool>();
  r.tokens.validate();
  return r;
}

py::dict report_dict(const DomainReport& report) {
  py::dict domains;
  for (const auto& [id, m] : report.domains)
    domains[py::str(id)] = py::dict(py::arg("balanced_accuracy") = m.balanced_accuracy, py::arg("macro_f1") = m.macro_f1);
  py::dict out;
  out["domains"] = domains;
  out["overall"] = py::dict(py::arg("balanced_accuracy") = report.overall.balanced_accuracy,
                            py::arg("macro_f1") = report.overall.macro_f1);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Domain-aware relative policy optimization: rewards, advantages, clustering and a toy trainer";
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeError>(m, "DrpoRuntimeError", PyExc_RuntimeError);

  // Rewards
  m.def("set_f1", [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    return set_f1(LabelSet(pred), LabelSet(gold));
  }, py::arg("pred"), py::arg("gold"));
  m.def("best_iou", [](const std::vector<BoxTuple>& boxes, const std::vector<std::vector<int>>& mask) {
    return best_iou(to_boxes(boxes), to_mask(mask));
  }, py::arg("boxes"), py::arg("mask"), "Best IoU of (x, y, w, h) boxes against a 0/1 mask given as rows.");
  m.def("format_reward", [](const std::vector<std::string>& labels,
                            const std::map<std::string, std::vector<BoxTuple>>& boxes) {
    Prediction p;
    p.labels = LabelSet(labels);
    for (const auto& [label, list] : boxes) p.boxes[label] = to_boxes(list);
    return format_reward(p);
  }, py::arg("labels"), py::arg("boxes"));
  m.def("combine", [](double acc, double iou, double aux, const std::tuple<double, double, double>& w) {
    const RewardWeights weights{std::get<0>(w), std::get<1>(w), std::get<2>(w)};
    weights.validate();
    return combine(acc, iou, aux, weights);
  }, py::arg("acc"), py::arg("iou"), py::arg("aux"), py::arg("weights") = std::make_tuple(0.6, 0.2, 0.2));

  // Clustering
  m.def("kmeans", [](const std::vector<std::vector<double>>& vectors, int k, std::uint64_t seed) {
    return model_dict(kmeans(to_vectors(vectors), k, seed));
  }, py::arg("vectors"), py::arg("k"), py::arg("seed") = 0);
  m.def("select_k_elbow", [](const std::vector<std::vector<double>>& vectors, int max_clusters, double tolerance,
                             std::uint64_t seed) {
    return model_dict(select_k_elbow(to_vectors(vectors), {max_clusters, tolerance}, seed));
  }, py::arg("vectors"), py::arg("max_clusters") = 10, py::arg("tolerance") = 0.10, py::arg("seed") = 0);
  m.def("elbow_k", [](const std::vector<double>& profile, double tolerance) { return elbow_k(profile, tolerance); },
        py::arg("inertia_by_k"), py::arg("tolerance") = 0.10);

  // Advantages
  m.def("temperature", &temperature, py::arg("count"), py::arg("mean_reward"), py::arg("floor") = 1e-4);
  m.def("kl_damping", [](const std::vector<double>& pre, const std::vector<double>& kl, double percentile) {
    const DampingResult d = kl_damping(pre, kl, {percentile, true});
    return std::make_pair(d.m, d.threshold);
  }, py::arg("pre_scaled"), py::arg("kl"), py::arg("percentile") = 0.9);
  m.def("compute_advantages", [](const std::vector<py::dict>& rollouts, const std::string& estimator,
                                 std::uint64_t seed, const std::string& config_yaml) {
    std::vector<Rollout> rs;
    for (const auto& d : rollouts) rs.push_back(to_rollout(d));
    const ExperimentConfig cfg = parse_config(config_yaml);
    const AdvantageTensor t = compute_advantages(build_iteration_batch(rs), parse_estimator(estimator),
                                                 cfg.advantage, seed);
    std::vector<py::dict> out;
    for (const auto& r : rs) {
      const AdvantageEntry* e = t.find(r.rollout_id);
      const auto& d = e->diagnostics;
      py::dict rec;
      rec["rollout_id"] = r.rollout_id;
      rec["advantage"] = e->advantage;
      rec["group_mean"] = d.group_mean;
      rec["group_std"] = d.group_std;
      rec["T_domain"] = d.t_domain;
      rec["T_cluster"] = d.t_cluster;
      rec["cluster"] = d.cluster;
      rec["m"] = d.m;
      rec["batch_std"] = d.batch_std;
      out.push_back(rec);
    }
    return out;
  }, py::arg("rollouts"), py::arg("estimator") = "grpo", py::arg("seed") = 0, py::arg("config") = "",
     "Advantages for rollout dicts (JSONL field names), returned in input order.");

  // Objective
  m.def("clipped_term", &clipped_term, py::arg("ratio"), py::arg("advantage"), py::arg("clip") = 0.2);

  // Metrics
  m.def("evaluate_dataset", [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& s) {
    std::vector<LabeledSample> samples;
    for (const auto& [pred, gold] : s) samples.push_back({LabelSet(pred), LabelSet(gold)});
    const DatasetMetrics d = evaluate_dataset(samples);
    return py::dict(py::arg("balanced_accuracy") = d.balanced_accuracy, py::arg("macro_f1") = d.macro_f1);
  }, py::arg("samples"), "Metrics over (predicted labels, gold labels) pairs.");

  // Config and experiment drivers
  m.def("normalize_config", [](const std::string& yaml) { return emit_config(parse_config(yaml)); },
        py::arg("yaml"), "Validates a YAML config and returns it with every default filled in.");
  m.def("train", [](const std::string& yaml, const std::string& estimator, std::uint64_t seed) {
    const ExperimentConfig cfg = parse_config(yaml);
    const TrainConfig tc = cfg.train_config(parse_estimator(estimator), seed);
    std::optional<TrainResult> result;
    {
      py::gil_scoped_release release;
      result = train(tc);
    }
    const TrainResult& r = *result;
    py::dict out;
    out["initial"] = report_dict(r.initial);
    out["final"] = report_dict(r.final);
    out["trace_csv"] = trace_csv(r.trace);
    return out;
  }, py::arg("config"), py::arg("estimator") = "grpo", py::arg("seed") = 0);
  m.def("simulate", [](const std::string& yaml, const std::string& output_dir) {
    const ExperimentConfig cfg = parse_config(yaml);
    std::ostringstream log;
    py::gil_scoped_release release;
    run_simulate(cfg, output_dir.empty() ? cfg.output_dir : output_dir, log);
  }, py::arg("config"), py::arg("output_dir") = "");
  m.def("score", [](const std::string& predictions, const std::string& gold, const std::string& config_yaml) {
    std::istringstream p(predictions), g(gold);
    std::ostringstream samples, metrics;
    run_score(p, g, samples, metrics, parse_config(config_yaml).weights);
    return std::make_pair(samples.str(), metrics.str());
  }, py::arg("predictions"), py::arg("gold"), py::arg("config") = "",
     "Scores prediction JSONL against gold JSONL; returns (per-sample JSONL, metric CSV).");
}
