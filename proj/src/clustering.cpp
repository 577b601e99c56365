// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/clustering.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "drpo/error.hpp"
#include "drpo/random.hpp"

namespace drpo {

namespace {

constexpr int kMaxIterations = 100;

/// Row-major copy of the input vectors.
struct Points {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> x;

  const double* row(std::size_t i) const { return x.data() + i * dim; }
};

/// k rows of dim values.
using Centroids = std::vector<double>;

/// D > 0 fixes the dimension at compile time; D = 0 reads it from `dim`.
template <std::size_t D>
double squared_distance(const double* a, const double* b, std::size_t dim) {
  const std::size_t n = D > 0 ? D : dim;
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

Points flatten(std::span<const RewardVector> vectors) {
  if (vectors.empty()) throw ValidationError("clustering needs at least one vector");
  Points p;
  p.n = vectors.size();
  p.dim = vectors.front().values.size();
  p.x.reserve(p.n * p.dim);
  for (const auto& v : vectors) {
    if (v.values.size() != p.dim) {
      throw ValidationError(fmt::format("reward vector for question '{}' has length {}, expected {}",
                                        v.question_id, v.values.size(), p.dim));
    }
    p.x.insert(p.x.end(), v.values.begin(), v.values.end());
  }
  return p;
}

std::size_t count_unique(const Points& p) {
  std::vector<std::size_t> order(p.n);
  for (std::size_t i = 0; i < p.n; ++i) order[i] = i;
  const auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(p.row(a), p.row(a) + p.dim, p.row(b), p.row(b) + p.dim);
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t unique = p.n == 0 ? 0 : 1;
  for (std::size_t i = 1; i < p.n; ++i) unique += less(order[i - 1], order[i]);
  return unique;
}

/// Squared distance from each point to its nearest centroid.
template <std::size_t D>
std::vector<double> nearest_distances(const Points& p, const Centroids& centroids) {
  const std::size_t k = centroids.size() / p.dim;
  std::vector<double> d2(p.n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t c = 0; c < k; ++c)
      d2[i] = std::min(d2[i], squared_distance<D>(p.row(i), centroids.data() + c * p.dim, p.dim));
  return d2;
}

/// One k-means++ draw: a point sampled with probability proportional to its
/// squared distance from the nearest existing centroid. d2 holds those
/// distances and is updated for the new centroid.
template <std::size_t D>
void add_plus_plus_centroid(const Points& p, Centroids& centroids, std::vector<double>& d2, Rng& rng) {
  std::size_t chosen = p.n;
  if (centroids.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, p.n - 1);
    chosen = pick(rng);
  } else {
    double total = 0.0;
    for (const double d : d2) total += d;
    std::uniform_real_distribution<double> u(0.0, total);
    const double target = u(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      chosen = i;
      if (target < acc) break;
    }
  }
  centroids.insert(centroids.end(), p.row(chosen), p.row(chosen) + p.dim);
  const double* c = p.row(chosen);
  for (std::size_t i = 0; i < p.n; ++i) d2[i] = std::min(d2[i], squared_distance<D>(p.row(i), c, p.dim));
}

template <std::size_t D>
void assign(const Points& p, const Centroids& centroids, std::vector<int>& out) {
  const std::size_t k = centroids.size() / p.dim;
  out.assign(p.n, 0);
  for (std::size_t i = 0; i < p.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = squared_distance<D>(p.row(i), centroids.data() + c * p.dim, p.dim);
      if (d < best) {
        best = d;
        out[i] = static_cast<int>(c);
      }
    }
  }
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken only from clusters that keep at least one member.
template <std::size_t D>
void repair_empty(const Points& p, Centroids& centroids, std::vector<int>& assignments) {
  const std::size_t k = centroids.size() / p.dim;
  std::vector<std::size_t> sizes(k, 0);
  for (const int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    std::size_t far = p.n;
    double far_d = -1.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      const auto owner = static_cast<std::size_t>(assignments[i]);
      if (sizes[owner] < 2) continue;
      const double d = squared_distance<D>(p.row(i), centroids.data() + owner * p.dim, p.dim);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == p.n) continue;  // fewer points than clusters; cannot happen when k <= n
    --sizes[static_cast<std::size_t>(assignments[far])];
    ++sizes[c];
    assignments[far] = static_cast<int>(c);
    std::copy(p.row(far), p.row(far) + p.dim, centroids.begin() + static_cast<std::ptrdiff_t>(c * p.dim));
  }
}

template <std::size_t D>
void means(const Points& p, const std::vector<int>& assignments, std::size_t k, Centroids& out,
           std::vector<std::size_t>& sizes) {
  const std::size_t dim = D > 0 ? D : p.dim;
  out.assign(k * dim, 0.0);
  sizes.assign(k, 0);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto a = static_cast<std::size_t>(assignments[i]);
    double* c = out.data() + a * dim;
    for (std::size_t j = 0; j < dim; ++j) c[j] += p.row(i)[j];
    ++sizes[a];
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < dim; ++j) out[c * dim + j] /= static_cast<double>(sizes[c]);
}

/// Moves single points between clusters while any move lowers the inertia.
/// Moving x from a (size n_a) to b (size n_b) changes the inertia by
/// n_b / (n_b + 1) |x - c_b|^2 - n_a / (n_a - 1) |x - c_a|^2.
template <std::size_t D>
void transfer_pass(const Points& p, std::vector<int>& assignments, std::size_t k) {
  Centroids centroids;
  std::vector<std::size_t> sizes;
  // n / (n + 1) per cluster, the inertia cost of adding one point.
  std::vector<double> grow(k);
  const auto refresh = [&](std::size_t c) {
    const double n = static_cast<double>(sizes[c]);
    grow[c] = n / (n + 1.0);
  };
  for (int round = 0; round < kMaxIterations; ++round) {
    means<D>(p, assignments, k, centroids, sizes);
    for (std::size_t c = 0; c < k; ++c) refresh(c);
    bool moved = false;
    for (std::size_t i = 0; i < p.n; ++i) {
      const auto from = static_cast<std::size_t>(assignments[i]);
      if (sizes[from] < 2) continue;
      const double* x = p.row(i);
      double* c_from = centroids.data() + from * p.dim;
      const double n_from = static_cast<double>(sizes[from]);
      const double removal = n_from / (n_from - 1.0) * squared_distance<D>(x, c_from, p.dim);
      double best_gain = 1e-12 * (1.0 + removal);
      std::size_t best = from;
      for (std::size_t to = 0; to < k; ++to) {
        if (to == from) continue;
        const double gain = removal - grow[to] * squared_distance<D>(x, centroids.data() + to * p.dim, p.dim);
        if (gain > best_gain) {
          best_gain = gain;
          best = to;
        }
      }
      if (best == from) continue;
      // Update the two affected centroids incrementally.
      double* c_to = centroids.data() + best * p.dim;
      const double n_to = static_cast<double>(sizes[best]);
      for (std::size_t j = 0; j < p.dim; ++j) {
        c_from[j] = (c_from[j] * n_from - x[j]) / (n_from - 1.0);
        c_to[j] = (c_to[j] * n_to + x[j]) / (n_to + 1.0);
      }
      --sizes[from];
      ++sizes[best];
      refresh(from);
      refresh(best);
      assignments[i] = static_cast<int>(best);
      moved = true;
    }
    if (!moved) break;
  }
}

struct Fit {
  Centroids centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  int iterations = 0;
};

template <std::size_t D>
Fit lloyd(const Points& p, Centroids centroids) {
  const std::size_t k = centroids.size() / p.dim;
  Fit fit;
  std::vector<std::size_t> sizes;
  std::vector<int> next;
  assign<D>(p, centroids, fit.assignments);
  repair_empty<D>(p, centroids, fit.assignments);
  while (fit.iterations < kMaxIterations) {
    ++fit.iterations;
    means<D>(p, fit.assignments, k, centroids, sizes);
    assign<D>(p, centroids, next);
    repair_empty<D>(p, centroids, next);
    if (next == fit.assignments) {
      // A partition no single move improves is also stable under Lloyd.
      transfer_pass<D>(p, fit.assignments, k);
      break;
    }
    std::swap(fit.assignments, next);
  }
  means<D>(p, fit.assignments, k, fit.centroids, sizes);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto a = static_cast<std::size_t>(fit.assignments[i]);
    fit.inertia += squared_distance<D>(p.row(i), fit.centroids.data() + a * p.dim, p.dim);
  }
  return fit;
}

template <std::size_t D>
Fit plus_plus_fit(const Points& p, int k, std::uint64_t seed) {
  Rng rng(derive_seed(seed, k));
  Centroids centroids;
  std::vector<double> d2(p.n, std::numeric_limits<double>::infinity());
  for (int c = 0; c < k; ++c) add_plus_plus_centroid<D>(p, centroids, d2, rng);
  return lloyd<D>(p, std::move(centroids));
}

/// Calls f.template operator()<D>() with D equal to dim for common small
/// dimensions and D = 0 otherwise.
template <typename F>
decltype(auto) with_dimension(std::size_t dim, F&& f) {
  switch (dim) {
    case 1: return f.template operator()<1>();
    case 2: return f.template operator()<2>();
    case 3: return f.template operator()<3>();
    case 4: return f.template operator()<4>();
    case 5: return f.template operator()<5>();
    case 6: return f.template operator()<6>();
    case 7: return f.template operator()<7>();
    case 8: return f.template operator()<8>();
    case 9: return f.template operator()<9>();
    case 10: return f.template operator()<10>();
    default: return f.template operator()<0>();
  }
}

ClusterModel to_model(std::span<const RewardVector> vectors, const Points& p, Fit fit) {
  ClusterModel model;
  model.k = static_cast<int>(fit.centroids.size() / p.dim);
  for (std::size_t c = 0; c < static_cast<std::size_t>(model.k); ++c) {
    const auto first = fit.centroids.begin() + static_cast<std::ptrdiff_t>(c * p.dim);
    model.centroids.emplace_back(first, first + static_cast<std::ptrdiff_t>(p.dim));
  }
  model.assignments = std::move(fit.assignments);
  model.iterations = fit.iterations;
  for (const auto& v : vectors) model.question_ids.push_back(v.question_id);
  model.inertia = fit.inertia;
  model.inertia_by_k = {model.inertia};
  return model;
}

}  // namespace

std::size_t count_unique(std::span<const RewardVector> vectors) {
  std::set<std::vector<double>> unique;
  for (const auto& v : vectors) unique.insert(v.values);
  return unique.size();
}

double inertia(std::span<const RewardVector> vectors, const std::vector<std::vector<double>>& centroids,
               const std::vector<int>& assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& c = centroids[static_cast<std::size_t>(assignments[i])];
    total += squared_distance<0>(vectors[i].values.data(), c.data(), c.size());
  }
  return total;
}

ClusterModel kmeans(std::span<const RewardVector> vectors, int k, std::uint64_t seed) {
  const Points p = flatten(vectors);
  const std::size_t unique = count_unique(p);
  if (k < 1 || static_cast<std::size_t>(k) > unique) {
    throw ValidationError(fmt::format("k = {} must lie in [1, {}] (number of distinct vectors)", k, unique));
  }
  return to_model(vectors, p, with_dimension(p.dim, [&]<std::size_t D>() { return plus_plus_fit<D>(p, k, seed); }));
}

int elbow_k(std::span<const double> inertia_by_k, double tolerance) {
  const int n = static_cast<int>(inertia_by_k.size());
  for (int k = 3; k <= n; ++k) {
    const double delta = inertia_by_k[k - 2] - inertia_by_k[k - 1];
    const double prev_delta = inertia_by_k[k - 3] - inertia_by_k[k - 2];
    if (delta < tolerance * prev_delta) return k - 1;
  }
  return n;
}

ClusterModel select_k_elbow(std::span<const RewardVector> vectors, const ElbowConfig& config, std::uint64_t seed) {
  if (!(config.tolerance > 0.0 && config.tolerance < 1.0)) {
    throw ValidationError(fmt::format("elbow tolerance must lie in (0, 1), got {}", config.tolerance));
  }
  if (config.max_clusters < 1) {
    throw ValidationError(fmt::format("max_clusters must be >= 1, got {}", config.max_clusters));
  }
  const Points p = flatten(vectors);
  const int k_max =
      static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(config.max_clusters), count_unique(p)));

  std::vector<Fit> fits;
  std::vector<double> profile;
  fits.reserve(static_cast<std::size_t>(k_max));
  with_dimension(p.dim, [&]<std::size_t D>() {
    for (int k = 1; k <= k_max; ++k) {
      Fit fresh = plus_plus_fit<D>(p, k, seed);
      if (k > 1 && fresh.inertia > fits.back().inertia) {
        // Refit from the k-1 solution plus one k-means++ draw, which cannot end
        // above the k-1 inertia.
        Rng rng(derive_seed(seed, k, 0x77a1));
        Centroids warm_start = fits.back().centroids;
        std::vector<double> d2 = nearest_distances<D>(p, warm_start);
        add_plus_plus_centroid<D>(p, warm_start, d2, rng);
        Fit warm = lloyd<D>(p, std::move(warm_start));
        if (warm.inertia < fresh.inertia) fresh = std::move(warm);
      }
      profile.push_back(fresh.inertia);
      fits.push_back(std::move(fresh));
      if (k >= 3 && elbow_k(profile, config.tolerance) < k) break;
    }
  });

  ClusterModel chosen =
      to_model(vectors, p, std::move(fits[static_cast<std::size_t>(elbow_k(profile, config.tolerance) - 1)]));
  chosen.inertia_by_k = std::move(profile);
  return chosen;
}

}  // namespace drpo
