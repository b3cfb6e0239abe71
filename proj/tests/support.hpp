#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evmem/evmem.hpp"

namespace evtest {

using evmem::Event;
using evmem::Vector;

// Reference arithmetic kept separate from the library's vector code.
inline double ref_cosine(const Vector& a, const Vector& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Vector ref_mean(const std::vector<Vector>& rows) {
  Vector m(rows.front().size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += r[i];
  for (double& x : m) x /= static_cast<double>(rows.size());
  return m;
}

inline Vector random_unit(evmem::SplitMix64& rng, std::size_t dim) {
  Vector v(dim);
  double n = 0;
  do {
    n = 0;
    for (double& x : v) {
      x = rng.uniform() * 2.0 - 1.0;
      n += x * x;
    }
  } while (n < 1e-6);
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

/// Unit vector at exactly cosine `s` from unit vector `c` (up to rounding).
inline Vector at_cosine(const Vector& c, double s, evmem::SplitMix64& rng) {
  Vector u = random_unit(rng, c.size());
  double d = 0;
  for (std::size_t i = 0; i < c.size(); ++i) d += u[i] * c[i];
  for (std::size_t i = 0; i < c.size(); ++i) u[i] -= d * c[i];
  double n = 0;
  for (double x : u) n += x * x;
  n = std::sqrt(n);
  Vector v(c.size());
  const double t = std::sqrt(std::max(0.0, 1.0 - s * s));
  for (std::size_t i = 0; i < c.size(); ++i) v[i] = s * c[i] + t * u[i] / n;
  return v;
}

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words{
      "paint",  "museum", "chicago", "job",    "apartment", "glass",   "class",   "friend", "garden", "river",
      "guitar", "recipe", "soup",    "hiking", "trail",     "dog",     "cat",     "book",   "novel",  "poem",
      "train",  "travel", "beach",   "sunset", "concert",   "violin",  "school",  "exam",   "coffee", "bakery",
      "market", "bike",   "race",    "medal",  "doctor",    "hospital", "sister", "wedding", "cake",  "photo"};
  return words;
}

inline std::string random_text(evmem::SplitMix64& rng, int min_words = 2, int max_words = 6) {
  const auto& pool = word_pool();
  const int n = min_words + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_words - min_words + 1)));
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += pool[rng.below(pool.size())];
  }
  return s;
}

/// Code of the evmem::Error thrown by `f`, or nullopt when nothing is thrown.
template <typename F>
std::optional<evmem::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const evmem::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Ids of lines shaped "[ID] ..." in a rendered prompt, in order.
inline std::vector<std::string> listed_ids(const std::string& prompt) {
  std::vector<std::string> out;
  std::istringstream in(prompt);
  for (std::string line; std::getline(in, line);) {
    if (line.size() < 3 || line[0] != '[') continue;
    const auto close = line.find(']');
    if (close != std::string::npos && close > 1) out.push_back(line.substr(1, close - 1));
  }
  return out;
}

inline Event make_event(std::string id, Vector embedding, std::string summary = "event") {
  Event e;
  e.id = std::move(id);
  e.span = {"u-" + e.id};
  e.summary = std::move(summary);
  e.embedding = std::move(embedding);
  e.session_ids = {"s1"};
  return e;
}

inline std::string pad_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "E" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// Random graph of `n` events embedded with `embedder`, with random typed edges.
inline evmem::Memory random_memory(evmem::SplitMix64& rng, std::size_t n, const evmem::Embedder& embedder,
                                   double edge_factor = 1.5, bool with_topics = true) {
  evmem::Config cfg;
  cfg.embedding_dim = static_cast<int>(embedder.dimension());
  evmem::Memory m(cfg);
  static const std::vector<std::string> labels{"causal", "temporal_before", "motivation", "part_of", "follow_up"};
  for (std::size_t i = 0; i < n; ++i) {
    auto summary = random_text(rng);
    Event e = make_event(pad_id(i), embedder.embed(summary), summary);
    e.time_info = rng.below(2) ? "last summer" : "";
    e.observed_at = "2023-05-" + std::to_string(10 + rng.below(18)) + "T10:00";
    if (rng.below(2)) e.participants = {"Ana"};
    m.store.add_event(std::move(e));
  }
  const auto edges = static_cast<std::size_t>(edge_factor * static_cast<double>(n));
  for (std::size_t i = 0; n > 1 && i < edges; ++i) {
    const auto a = rng.below(n), b = rng.below(n);
    if (a == b) continue;
    m.store.add_relation({pad_id(a), pad_id(b), labels[rng.below(labels.size())], {"u-" + pad_id(a)}});
  }
  if (with_topics && n > 0) evmem::init_topics(m.topics, m.store);
  return m;
}

}  // namespace evtest
