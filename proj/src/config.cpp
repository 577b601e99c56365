// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "drpo/error.hpp"

namespace drpo {

namespace {

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

/// Reads one YAML mapping, tracking which keys were consumed so that anything
/// left over can be reported.
class Table {
 public:
  Table(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) throw ValidationError(fmt::format("{}: expected a mapping", path_.empty() ? "<root>" : path_));
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const YAML::Node v = get(key);
    if (!v) return;
    if (!v.IsScalar()) throw ValidationError(fmt::format("{}: expected a scalar", join_path(path_, key)));
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ValidationError(fmt::format("{}: cannot parse '{}'", join_path(path_, key), v.Scalar()));
    }
  }

  /// Calls `fn` with the child table when present.
  void table(const std::string& key, const std::function<void(Table&)>& fn) {
    seen_.insert(key);
    const YAML::Node v = get(key);
    if (!v) return;
    Table child(v, join_path(path_, key));
    fn(child);
    child.finish();
  }

  /// Calls `fn(item, item_path)` for each element of a sequence.
  void sequence(const std::string& key, const std::function<void(const YAML::Node&, const std::string&)>& fn) {
    seen_.insert(key);
    const YAML::Node v = get(key);
    if (!v) return;
    const std::string path = join_path(path_, key);
    if (!v.IsSequence()) throw ValidationError(fmt::format("{}: expected a list", path));
    for (std::size_t i = 0; i < v.size(); ++i) fn(v[i], fmt::format("{}[{}]", path, i));
  }

  bool has(const std::string& key) const { return static_cast<bool>(get(key)); }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ValidationError(fmt::format("{}: unknown key", join_path(path_, key)));
    }
  }

 private:
  YAML::Node get(const std::string& key) const {
    const YAML::Node& node = node_;
    return node[key];
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ValidationError(fmt::format("{}: expected a scalar", path));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError(fmt::format("{}: cannot parse '{}'", path, node.Scalar()));
  }
}

template <typename Fn>
void with_prefix(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", prefix, e.what()));
  }
}

std::string number(double v) { return fmt::format("{}", v); }

}  // namespace

void ExperimentConfig::validate() const {
  if (estimators.empty()) throw ValidationError("estimators: must list at least one estimator");
  if (seeds.empty()) throw ValidationError("seeds: must list at least one seed");
  with_prefix("rewards", [&] { weights.validate(); });
  with_prefix("advantage", [&] { advantage.validate(); });
  with_prefix("objective", [&] { objective.validate(); });
  try {
    environment.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("environment.{}", e.what()));
  }
  train_config(estimators.front(), seeds.front()).validate();
  if (output_dir.empty()) throw ValidationError("output.dir: must be nonempty");
}

TrainConfig ExperimentConfig::train_config(Estimator estimator, std::uint64_t seed) const {
  TrainConfig t;
  t.environment = environment;
  t.estimator = estimator;
  t.weights = weights;
  t.advantage = advantage;
  t.objective = objective;
  t.group_size = group_size;
  t.questions_per_iteration = questions_per_iteration;
  t.iterations = iterations;
  t.learning_rate = learning_rate;
  t.eval_questions = eval_questions;
  t.eval_interval = eval_interval;
  t.seed = seed;
  return t;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(fmt::format("<root>: malformed YAML ({})", e.what()));
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) {
    c.validate();
    return c;
  }
  Table top(root, "");

  const YAML::Node& croot = root;
  if (croot["estimators"]) c.estimators.clear();
  top.sequence("estimators", [&](const YAML::Node& n, const std::string& path) {
    with_prefix(path, [&] { c.estimators.push_back(parse_estimator(scalar<std::string>(n, path))); });
  });
  if (croot["seeds"]) c.seeds.clear();
  top.sequence("seeds", [&](const YAML::Node& n, const std::string& path) {
    c.seeds.push_back(scalar<std::uint64_t>(n, path));
  });

  top.table("rewards", [&](Table& t) {
    t.read("acc", c.weights.acc);
    t.read("iou", c.weights.iou);
    t.read("aux", c.weights.aux);
  });
  top.table("advantage", [&](Table& t) {
    t.read("epsilon", c.advantage.epsilon);
    t.read("temperature_floor", c.advantage.temperature_floor);
    t.read("max_clusters", c.advantage.elbow.max_clusters);
    t.read("elbow_tolerance", c.advantage.elbow.tolerance);
    t.read("damping_percentile", c.advantage.damping.percentile);
    t.read("damping", c.advantage.damping.enabled);
  });
  top.table("objective", [&](Table& t) {
    t.read("clip", c.objective.clip);
    t.read("kl_coef", c.objective.kl_coef);
  });
  top.table("environment", [&](Table& t) {
    t.read("group_size", c.group_size);
    t.read("questions_per_iteration", c.questions_per_iteration);
    t.read("iterations", c.iterations);
    t.read("learning_rate", c.learning_rate);
    t.read("eval_questions", c.eval_questions);
    t.read("eval_interval", c.eval_interval);
    t.read("feature_dim", c.environment.feature_dim);
    t.read("noise_scale", c.environment.noise_scale);
    t.read("prototype_seed", c.environment.prototype_seed);
    std::vector<DomainSpec> domains;
    t.sequence("domains", [&](const YAML::Node& n, const std::string& path) {
      Table d(n, path);
      DomainSpec spec;
      d.read("id", spec.id);
      d.read("prevalence", spec.prevalence);
      d.read("labels", spec.num_labels);
      d.read("difficulty", spec.difficulty);
      d.read("grid_size", spec.grid_size);
      d.finish();
      domains.push_back(std::move(spec));
    });
    if (t.has("domains")) c.environment.domains = std::move(domains);
  });
  top.table("output", [&](Table& t) { t.read("dir", c.output_dir); });
  top.finish();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "estimators" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const Estimator e : c.estimators) out << std::string(to_string(e));
  out << YAML::EndSeq;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto s : c.seeds) out << s;
  out << YAML::EndSeq;

  out << YAML::Key << "rewards" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "acc" << YAML::Value << number(c.weights.acc);
  out << YAML::Key << "iou" << YAML::Value << number(c.weights.iou);
  out << YAML::Key << "aux" << YAML::Value << number(c.weights.aux);
  out << YAML::EndMap;

  out << YAML::Key << "advantage" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epsilon" << YAML::Value << number(c.advantage.epsilon);
  out << YAML::Key << "temperature_floor" << YAML::Value << number(c.advantage.temperature_floor);
  out << YAML::Key << "max_clusters" << YAML::Value << c.advantage.elbow.max_clusters;
  out << YAML::Key << "elbow_tolerance" << YAML::Value << number(c.advantage.elbow.tolerance);
  out << YAML::Key << "damping_percentile" << YAML::Value << number(c.advantage.damping.percentile);
  out << YAML::Key << "damping" << YAML::Value << c.advantage.damping.enabled;
  out << YAML::EndMap;

  out << YAML::Key << "objective" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "clip" << YAML::Value << number(c.objective.clip);
  out << YAML::Key << "kl_coef" << YAML::Value << number(c.objective.kl_coef);
  out << YAML::EndMap;

  out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "group_size" << YAML::Value << c.group_size;
  out << YAML::Key << "questions_per_iteration" << YAML::Value << c.questions_per_iteration;
  out << YAML::Key << "iterations" << YAML::Value << c.iterations;
  out << YAML::Key << "learning_rate" << YAML::Value << number(c.learning_rate);
  out << YAML::Key << "eval_questions" << YAML::Value << c.eval_questions;
  out << YAML::Key << "eval_interval" << YAML::Value << c.eval_interval;
  out << YAML::Key << "feature_dim" << YAML::Value << c.environment.feature_dim;
  out << YAML::Key << "noise_scale" << YAML::Value << number(c.environment.noise_scale);
  out << YAML::Key << "prototype_seed" << YAML::Value << c.environment.prototype_seed;
  out << YAML::Key << "domains" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : c.environment.domains) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << d.id;
    out << YAML::Key << "prevalence" << YAML::Value << number(d.prevalence);
    out << YAML::Key << "labels" << YAML::Value << d.num_labels;
    out << YAML::Key << "difficulty" << YAML::Value << number(d.difficulty);
    out << YAML::Key << "grid_size" << YAML::Value << d.grid_size;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << c.output_dir;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace drpo
