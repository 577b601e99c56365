// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace drpo {

/// Unordered set of diagnosis labels. Labels are trimmed of surrounding
/// whitespace on insertion and compared case-sensitively.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<std::string> labels);
  explicit LabelSet(const std::vector<std::string>& labels);

  void insert(const std::string& label);
  bool contains(const std::string& label) const;
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  const std::set<std::string>& labels() const { return labels_; }
  std::vector<std::string> to_vector() const { return {labels_.begin(), labels_.end()}; }

  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  bool operator==(const LabelSet&) const = default;

 private:
  std::set<std::string> labels_;
};

/// Axis-aligned box in pixel units; x runs along columns, y along rows.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const Box&) const = default;
};

/// Binary segmentation mask stored row-major.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width);
  Mask(int height, int width, std::vector<std::uint8_t> cells);

  int height() const { return height_; }
  int width() const { return width_; }
  bool at(int row, int col) const { return cells_[index(row, col)] != 0; }
  void set(int row, int col, bool value) { cells_[index(row, col)] = value ? 1 : 0; }
  /// Sets every cell whose centre lies inside the box.
  void fill_box(const Box& box);
  std::size_t count() const;
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  bool operator==(const Mask&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct RewardWeights {
  double acc = 0.6;
  double iou = 0.2;
  double aux = 0.2;

  /// Throws ValidationError on negative weights or a zero total.
  void validate() const;
  bool operator==(const RewardWeights&) const = default;
};

struct RewardBreakdown {
  double acc = 0.0;
  double iou = 0.0;
  double aux = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

/// What a response predicted: a label set plus the boxes it drew, keyed by
/// the label each box supports.
struct Prediction {
  LabelSet labels;
  std::map<std::string, std::vector<Box>> boxes;

  std::vector<Box> all_boxes() const;
  bool operator==(const Prediction&) const = default;
};

/// Set F1 = 2|pred ∩ gold| / (|pred| + |gold|); 1.0 when both are empty.
double set_f1(const LabelSet& pred, const LabelSet& gold);

/// Cell range [begin, end) covered by a box along one axis under cell-centre
/// rasterization, clipped to [0, extent).
struct CellSpan {
  int begin = 0;
  int end = 0;
};
CellSpan rasterize_span(double origin, double length, int extent);

/// Best IoU between any box and the mask. Boxes are rasterized at mask
/// resolution (a cell is covered when its centre lies in [x, x+w) x [y, y+h));
/// parts outside the grid are clipped. Returns 0 for no boxes or an empty mask.
double best_iou(std::span<const Box> boxes, const Mask& mask);

/// 1.0 iff every predicted label has at least one box (vacuously 1.0 for an
/// empty prediction), else 0.0.
double format_reward(const LabelSet& pred, const std::map<std::string, std::size_t>& boxes_per_label);
double format_reward(const Prediction& pred);

double combine(double acc, double iou, double aux, const RewardWeights& weights);
double combine(const RewardBreakdown& parts, const RewardWeights& weights);

/// Scores a prediction against gold labels and mask.
RewardBreakdown score_prediction(const Prediction& pred, const LabelSet& gold, const Mask& gold_mask);

}  // namespace drpo
