// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "drpo/config.hpp"
#include "drpo/synthenv.hpp"

namespace drpo {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitRuntime = 2,
};

/// Writes `<dir>/config.yaml`, one `<dir>/trace_<estimator>_seed<seed>.csv`
/// per run and `<dir>/summary.csv`. Each file is written to a temporary name
/// and renamed into place.
void run_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Reads rollout JSONL and writes one advantage record per rollout, in input
/// order, using the first configured estimator and seed.
void run_advantages(std::istream& in, std::ostream& out, const ExperimentConfig& config);

/// Scores predictions against gold: per-sample reward JSONL on `samples_out`
/// and a dataset / domain / overall metric CSV on `metrics_out`.
void run_score(std::istream& predictions, std::istream& gold, std::ostream& samples_out, std::ostream& metrics_out,
               const RewardWeights& weights);

std::string trace_csv(const std::vector<TraceRow>& trace);

/// Shortest round-trip decimal form ("nan" for NaN).
std::string format_number(double v);

}  // namespace drpo
