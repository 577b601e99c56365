// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include <fmt/format.h>

#include "drpo/error.hpp"

namespace drpo {

namespace {

std::string trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n\v\f";
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kSpace);
  return std::string(s.substr(first, last - first + 1));
}

int clamp_to_grid(double v, int extent) {
  if (v <= 0.0) return 0;
  if (v >= static_cast<double>(extent)) return extent;
  return static_cast<int>(v);
}

}  // namespace

LabelSet::LabelSet(std::initializer_list<std::string> labels) {
  for (const auto& l : labels) insert(l);
}

LabelSet::LabelSet(const std::vector<std::string>& labels) {
  for (const auto& l : labels) insert(l);
}

void LabelSet::insert(const std::string& label) { labels_.insert(trim(label)); }

bool LabelSet::contains(const std::string& label) const { return labels_.count(trim(label)) > 0; }

Mask::Mask(int height, int width) : Mask(height, width, {}) {}

Mask::Mask(int height, int width, std::vector<std::uint8_t> cells)
    : height_(height), width_(width), cells_(std::move(cells)) {
  if (height <= 0 || width <= 0) {
    throw ValidationError(fmt::format("mask dimensions must be positive, got {}x{}", height, width));
  }
  const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (cells_.empty()) cells_.assign(n, 0);
  if (cells_.size() != n) {
    throw ValidationError(fmt::format("mask has {} cells, expected {}", cells_.size(), n));
  }
  for (auto& c : cells_) c = c != 0 ? 1 : 0;
}

void Mask::fill_box(const Box& box) {
  const CellSpan cols = rasterize_span(box.x, box.w, width_);
  const CellSpan rows = rasterize_span(box.y, box.h, height_);
  for (int r = rows.begin; r < rows.end; ++r)
    for (int c = cols.begin; c < cols.end; ++c) set(r, c, true);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

void RewardWeights::validate() const {
  for (const double w : {acc, iou, aux}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError(fmt::format("reward weights must be finite and nonnegative, got ({}, {}, {})",
                                        acc, iou, aux));
    }
  }
  if (acc + iou + aux <= 0.0) throw ValidationError("reward weights must not all be zero");
}

std::vector<Box> Prediction::all_boxes() const {
  std::vector<Box> out;
  for (const auto& [label, list] : boxes) out.insert(out.end(), list.begin(), list.end());
  return out;
}

double set_f1(const LabelSet& pred, const LabelSet& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  std::size_t overlap = 0;
  for (const auto& l : pred)
    if (gold.labels().count(l)) ++overlap;
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(pred.size() + gold.size());
}

CellSpan rasterize_span(double origin, double length, int extent) {
  if (!std::isfinite(origin) || !std::isfinite(length) || length < 0.0) {
    throw ValidationError(fmt::format("invalid box extent (origin {}, length {})", origin, length));
  }
  // Cell c is covered iff origin <= c + 0.5 < origin + length.
  const int begin = clamp_to_grid(std::ceil(origin - 0.5), extent);
  const int end = clamp_to_grid(std::ceil(origin + length - 0.5), extent);
  return {begin, std::max(begin, end)};
}

double best_iou(std::span<const Box> boxes, const Mask& mask) {
  if (boxes.empty()) return 0.0;
  const std::size_t mask_area = mask.count();
  if (mask_area == 0) return 0.0;

  // Summed-area table so each box costs O(1).
  const int h = mask.height();
  const int w = mask.width();
  std::vector<std::size_t> sat(static_cast<std::size_t>(h + 1) * static_cast<std::size_t>(w + 1), 0);
  auto at = [&](int r, int c) -> std::size_t& {
    return sat[static_cast<std::size_t>(r) * static_cast<std::size_t>(w + 1) + static_cast<std::size_t>(c)];
  };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      at(r + 1, c + 1) = at(r, c + 1) + at(r + 1, c) - at(r, c) + (mask.at(r, c) ? 1 : 0);

  double best = 0.0;
  for (const Box& box : boxes) {
    const CellSpan cols = rasterize_span(box.x, box.w, w);
    const CellSpan rows = rasterize_span(box.y, box.h, h);
    const auto box_area = static_cast<std::size_t>(cols.end - cols.begin) *
                          static_cast<std::size_t>(rows.end - rows.begin);
    const std::size_t inter = at(rows.end, cols.end) - at(rows.begin, cols.end) -
                              at(rows.end, cols.begin) + at(rows.begin, cols.begin);
    const std::size_t uni = box_area + mask_area - inter;
    best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
  }
  return best;
}

double format_reward(const LabelSet& pred, const std::map<std::string, std::size_t>& boxes_per_label) {
  for (const auto& label : pred) {
    const auto it = boxes_per_label.find(label);
    if (it == boxes_per_label.end() || it->second == 0) return 0.0;
  }
  return 1.0;
}

double format_reward(const Prediction& pred) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [label, list] : pred.boxes) counts[label] += list.size();
  return format_reward(pred.labels, counts);
}

double combine(double acc, double iou, double aux, const RewardWeights& weights) {
  return weights.acc * acc + weights.iou * iou + weights.aux * aux;
}

double combine(const RewardBreakdown& parts, const RewardWeights& weights) {
  return combine(parts.acc, parts.iou, parts.aux, weights);
}

RewardBreakdown score_prediction(const Prediction& pred, const LabelSet& gold, const Mask& gold_mask) {
  const std::vector<Box> boxes = pred.all_boxes();
  return {set_f1(pred.labels, gold), best_iou(boxes, gold_mask), format_reward(pred)};
}

}  // namespace drpo
