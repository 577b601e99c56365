// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/metrics.hpp"

#include <fmt/format.h>

#include "drpo/error.hpp"

namespace drpo {

namespace {

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

LabelMetrics label_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) {
    throw ValidationError(fmt::format("negative confusion count (tp {}, tn {}, fp {}, fn {})", c.tp, c.tn, c.fp, c.fn));
  }
  const auto tp = static_cast<double>(c.tp);
  LabelMetrics m;
  m.accuracy = ratio_or_zero(tp + static_cast<double>(c.tn), static_cast<double>(c.total()));
  m.precision = ratio_or_zero(tp, tp + static_cast<double>(c.fp));
  m.recall = ratio_or_zero(tp, tp + static_cast<double>(c.fn));
  m.f1 = ratio_or_zero(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

DatasetMetrics dataset_metrics(std::span<const LabelMetrics> per_label) {
  DatasetMetrics out;
  if (per_label.empty()) return out;
  for (const auto& m : per_label) {
    out.balanced_accuracy += m.accuracy;
    out.macro_f1 += m.f1;
  }
  const auto n = static_cast<double>(per_label.size());
  out.balanced_accuracy /= n;
  out.macro_f1 /= n;
  return out;
}

std::map<std::string, ConfusionCounts> confusion_counts(std::span<const LabeledSample> samples) {
  std::map<std::string, ConfusionCounts> counts;
  for (const auto& s : samples)
    for (const auto& l : s.gold) counts[l];
  for (const auto& s : samples) {
    for (auto& [label, c] : counts) {
      const bool p = s.predicted.contains(label);
      const bool g = s.gold.contains(label);
      if (p && g) ++c.tp;
      else if (p) ++c.fp;
      else if (g) ++c.fn;
      else ++c.tn;
    }
  }
  return counts;
}

DatasetMetrics evaluate_dataset(std::span<const LabeledSample> samples) {
  std::vector<LabelMetrics> per_label;
  for (const auto& [_, c] : confusion_counts(samples)) per_label.push_back(label_metrics(c));
  return dataset_metrics(per_label);
}

DomainReport domain_report(const std::map<std::string, std::vector<DatasetMetrics>>& datasets_by_domain) {
  DomainReport report;
  for (const auto& [domain, datasets] : datasets_by_domain) {
    if (datasets.empty()) throw ValidationError(fmt::format("domain '{}' has no datasets", domain));
    DatasetMetrics m;
    for (const auto& d : datasets) {
      m.balanced_accuracy += d.balanced_accuracy;
      m.macro_f1 += d.macro_f1;
    }
    m.balanced_accuracy /= static_cast<double>(datasets.size());
    m.macro_f1 /= static_cast<double>(datasets.size());
    report.domains[domain] = m;
  }
  if (!report.domains.empty()) {
    for (const auto& [_, m] : report.domains) {
      report.overall.balanced_accuracy += m.balanced_accuracy;
      report.overall.macro_f1 += m.macro_f1;
    }
    report.overall.balanced_accuracy /= static_cast<double>(report.domains.size());
    report.overall.macro_f1 /= static_cast<double>(report.domains.size());
  }
  return report;
}

}  // namespace drpo
