// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drpo/rewards.hpp"

namespace drpo {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct LabelMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct DatasetMetrics {
  double balanced_accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Zero denominators give 0 for precision, recall and F1 (and accuracy).
LabelMetrics label_metrics(const ConfusionCounts& counts);

/// Unweighted means over labels. An empty label set gives zeros.
DatasetMetrics dataset_metrics(std::span<const LabelMetrics> per_label);

/// One (prediction, gold) pair of a multi-label dataset.
struct LabeledSample {
  LabelSet predicted;
  LabelSet gold;
};

/// Per-label confusion counts over the labels that occur in the gold data;
/// predicted labels never seen in gold are ignored.
std::map<std::string, ConfusionCounts> confusion_counts(std::span<const LabeledSample> samples);

DatasetMetrics evaluate_dataset(std::span<const LabeledSample> samples);

struct DomainReport {
  /// Unweighted mean over each domain's datasets.
  std::map<std::string, DatasetMetrics> domains;
  /// Unweighted mean over domains.
  DatasetMetrics overall;
};

DomainReport domain_report(const std::map<std::string, std::vector<DatasetMetrics>>& datasets_by_domain);

}  // namespace drpo
