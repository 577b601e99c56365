// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace drpo {

/// The rewards of one question's rollouts, used as a clustering point.
struct RewardVector {
  std::string question_id;
  std::vector<double> values;
};

struct ClusterModel {
  int k = 0;
  std::vector<std::vector<double>> centroids;
  /// Cluster index per input vector, in input order.
  std::vector<int> assignments;
  std::vector<std::string> question_ids;
  /// Inertia of the fitted models for k = 1, 2, ...; a single-k fit holds one entry.
  std::vector<double> inertia_by_k;
  /// Inertia of this model.
  double inertia = 0.0;
  int iterations = 0;
};

struct ElbowConfig {
  int max_clusters = 10;
  double tolerance = 0.10;

  bool operator==(const ElbowConfig&) const = default;
};

/// Number of distinct vectors (exact equality).
std::size_t count_unique(std::span<const RewardVector> vectors);

/// Sum of squared Euclidean distances from each vector to its centroid.
double inertia(std::span<const RewardVector> vectors, const std::vector<std::vector<double>>& centroids,
               const std::vector<int>& assignments);

/// Lloyd's algorithm from a seeded k-means++ start. Stops when assignments are
/// stable or after 100 iterations. Ties go to the lowest cluster index and an
/// empty cluster takes the point farthest from its centroid. The converged
/// partition is then refined by single-point moves that lower the inertia.
/// Requires 1 <= k <= count_unique(vectors).
ClusterModel kmeans(std::span<const RewardVector> vectors, int k, std::uint64_t seed);

/// Elbow rule over an inertia profile I_1..I_n (index 0 holds I_1). Returns the
/// first k-1 with I_{k-1} - I_k < tolerance * (I_{k-2} - I_{k-1}), k >= 3, or n
/// when no such k exists.
int elbow_k(std::span<const double> inertia_by_k, double tolerance);

/// Fits k = 1..min(max_clusters, N_unique) with kmeans and returns the model
/// chosen by elbow_k. A fit that ends above the k-1 inertia is replaced by one
/// seeded from the k-1 centroids plus a k-means++ draw, so the profile is
/// non-increasing. Fitting stops at the first k that triggers the rule, so
/// inertia_by_k may be shorter than the cap.
ClusterModel select_k_elbow(std::span<const RewardVector> vectors, const ElbowConfig& config,
                            std::uint64_t seed);

}  // namespace drpo
