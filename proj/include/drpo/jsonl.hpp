// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drpo/advantage.hpp"
#include "drpo/batch.hpp"
#include "drpo/rewards.hpp"

namespace drpo {

/// Rollout records, one JSON object per LF-terminated line:
///
///   {"question_id": str, "domain": str, "rollout_id": str, "reward": float,
///    "reward_breakdown": {"acc": float, "iou": float, "aux": float},   (optional)
///    "logp_current": [float], "logp_old": [float], "logp_ref": [float],
///    "is_greedy": bool}                                                 (optional)
///
/// Blank lines are skipped. Schema violations throw ValidationError with the
/// 1-based line number.
std::vector<Rollout> read_rollouts(std::istream& in);
void write_rollouts(std::ostream& out, const std::vector<Rollout>& rollouts);
/// The rollouts of a batch in canonical order.
std::vector<Rollout> flatten(const IterationBatch& batch);

/// {"rollout_id", "advantage", "diagnostics": {"group_mean", "group_std",
/// "T_domain", "T_cluster", "m", "batch_std"}} for each rollout, in the order
/// of `rollouts`.
void write_advantages(std::ostream& out, const std::vector<Rollout>& rollouts, const AdvantageTensor& advantages);

struct PredictionRecord {
  std::string id;
  Prediction prediction;
};

struct GoldRecord {
  std::string id;
  std::string domain;
  /// Defaults to the domain.
  std::string dataset;
  LabelSet labels;
  /// Absent masks score an IoU of 0.
  std::optional<Mask> mask;
};

/// {"id": str, "labels": [str], "boxes": [{"label": str, "x", "y", "w", "h"}]}
std::vector<PredictionRecord> read_predictions(std::istream& in);

/// {"id": str, "domain": str, "dataset": str (optional), "labels": [str],
///  "mask": {"height": int, "width": int, "rows": ["0110", ...]}
///       or {"height": int, "width": int, "boxes": [{"x", "y", "w", "h"}]}}  (optional)
std::vector<GoldRecord> read_gold(std::istream& in);

}  // namespace drpo
