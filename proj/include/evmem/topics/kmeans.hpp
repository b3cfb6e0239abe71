#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "evmem/core/random.hpp"
#include "evmem/core/vector_math.hpp"
#include "evmem/error.hpp"

namespace evmem {

/// Number of topics for a memory of `n_samples` events: max(2, min(floor(n/5), 50)).
inline int cluster_count(long long n_samples) {
  if (n_samples <= 0) throw Error(ErrorCode::validation, "cluster_count needs at least one sample");
  return static_cast<int>(std::max(2LL, std::min(n_samples / 5, 50LL)));
}

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<Vector> centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each Lloyd iteration
  int iterations = 0;
};

inline double kmeans_inertia(std::span<const Vector> points, const std::vector<std::size_t>& assignments,
                             const std::vector<Vector>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += squared_distance(points[i], centroids[assignments[i]]);
  return s;
}

namespace detail {

inline std::vector<Vector> kmeanspp_seed(std::span<const Vector> points, std::size_t k, SplitMix64& rng) {
  const std::size_t n = points.size();
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < k) {
    const Vector& last = points[chosen.back()];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], last));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > r) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      // every remaining point coincides with a center: take the first unused index
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
    }
    chosen.push_back(pick);
  }
  std::vector<Vector> centers;
  centers.reserve(k);
  for (auto i : chosen) centers.push_back(points[i]);
  return centers;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops when no assignment changes
/// or after `max_iterations`. A point keeps its cluster unless another centroid
/// is strictly closer, and an emptied cluster is reseeded with the point
/// farthest from its own centroid, so every cluster ends non-empty.
inline KMeansResult kmeans(std::span<const Vector> points, std::size_t k, std::uint64_t seed,
                           int max_iterations = 100) {
  const std::size_t n = points.size();
  if (k == 0) throw Error(ErrorCode::validation, "kmeans needs k >= 1");
  if (k > n) {
    throw Error(ErrorCode::validation,
                "kmeans with k=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " points");
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw Error(ErrorCode::dimension_mismatch, "kmeans points differ in dimension");

  SplitMix64 rng(seed);
  KMeansResult r;
  r.centroids = detail::kmeanspp_seed(points, k, rng);
  constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
  r.assignments.assign(n, kUnassigned);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = r.assignments[i];
      double best_d = best == kUnassigned ? std::numeric_limits<double>::infinity()
                                          : squared_distance(points[i], r.centroids[best]);
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], r.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best != r.assignments[i]) {
        r.assignments[i] = best;
        changed = true;
      }
    }

    std::vector<std::size_t> sizes(k, 0);
    for (auto a : r.assignments) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = kUnassigned;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[r.assignments[i]] < 2) continue;
        const double d = squared_distance(points[i], r.centroids[r.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[r.assignments[far]];
      r.assignments[far] = c;
      sizes[c] = 1;
      r.centroids[c] = points[far];
      changed = true;
    }

    for (std::size_t c = 0; c < k; ++c) {
      Vector m(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        if (r.assignments[i] == c)
          for (std::size_t d = 0; d < dim; ++d) m[d] += points[i][d];
      for (double& x : m) x /= static_cast<double>(sizes[c]);
      r.centroids[c] = std::move(m);
    }

    r.inertia = kmeans_inertia(points, r.assignments, r.centroids);
    r.inertia_history.push_back(r.inertia);
    r.iterations = iter + 1;
    if (!changed) break;
  }
  return r;
}

}  // namespace evmem
