#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "evmem/error.hpp"

namespace evmem {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline void normalize_in_place(Vector& v) {
  const double n = l2_norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
/// Throws on dimension mismatch or an all-zero operand.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "cosine of vectors with dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::zero_vector, "cosine of an all-zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// Arithmetic mean of equally sized vectors; empty input yields an empty vector.
inline Vector mean_of(const std::vector<std::span<const double>>& rows) {
  if (rows.empty()) return {};
  Vector m(rows.front().size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += r[i];
  for (double& x : m) x /= static_cast<double>(rows.size());
  return m;
}

}  // namespace evmem
