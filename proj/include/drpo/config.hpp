// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drpo/advantage.hpp"
#include "drpo/objective.hpp"
#include "drpo/rewards.hpp"
#include "drpo/synthenv.hpp"

namespace drpo {

/// Everything a run needs. Defaults: reward weights (0.6, 0.2, 0.2), elbow
/// tolerance 0.10 with at most 10 clusters, damping percentile 0.9, KL
/// coefficient 1e-4 and learning rate 1e-6; epsilon 1e-4, clip 0.2 and group
/// size 5 otherwise.
struct ExperimentConfig {
  std::vector<Estimator> estimators{Estimator::kGrpo};
  std::vector<std::uint64_t> seeds{0};
  RewardWeights weights;
  AdvantageConfig advantage;
  ObjectiveConfig objective;
  EnvironmentSpec environment = imbalanced_environment();
  int group_size = 5;
  int questions_per_iteration = 512;
  int iterations = 300;
  double learning_rate = 1e-6;
  int eval_questions = 200;
  int eval_interval = 1;
  std::string output_dir = "drpo_out";

  /// Throws ValidationError naming the offending field path.
  void validate() const;
  TrainConfig train_config(Estimator estimator, std::uint64_t seed) const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a YAML document. Unknown keys and out-of-range values are errors whose
/// message starts with the field path (e.g. "estimators[1]: ...").
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Normalized YAML with every field spelled out; parse_config inverts it.
std::string emit_config(const ExperimentConfig& config);

}  // namespace drpo
