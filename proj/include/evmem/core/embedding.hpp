#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "evmem/core/random.hpp"
#include "evmem/core/vector_math.hpp"
#include "evmem/error.hpp"

namespace evmem {

/// Text embedding provider. Implementations must be callable from several threads.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
  virtual Vector embed(std::string_view text) const = 0;

  virtual std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }

 protected:
  static void require_text(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::validation, "cannot embed empty text");
  }
};

/// Offline, deterministic embedder. Each word and each padded character trigram
/// of the lowercased text is hashed to a seeded pseudo-random direction; the
/// weighted sum is L2-normalized. Texts sharing words or word fragments land
/// close together, which is enough signal for ranking in tests and demos.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0x5eed) : dim_(dimension), seed_(seed) {
    if (dim_ == 0) throw Error(ErrorCode::validation, "embedding dimension must be positive");
  }

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "hash-" + std::to_string(dim_) + "-" + std::to_string(seed_); }

  Vector embed(std::string_view text) const override {
    require_text(text);
    Vector v(dim_, 0.0);
    const auto words = tokenize(text);
    if (words.empty()) {
      accumulate(v, "raw:" + std::string(text), 1.0);
    }
    for (const auto& w : words) {
      if (is_stopword(w) && words.size() > 1) continue;
      accumulate(v, "w:" + w, 1.0);
      const std::string padded = "#" + w + "#";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) accumulate(v, "g:" + padded.substr(i, 3), 0.35);
    }
    normalize_in_place(v);
    if (l2_norm(v) == 0.0) v[0] = 1.0;
    return v;
  }

  static bool is_stopword(std::string_view w) {
    static constexpr std::array<std::string_view, 48> kStop{
        "a",    "about", "after", "all",  "also", "an",   "and",  "any",  "are",   "at",    "be",   "been",
        "but",  "by",    "did",   "do",   "for",  "from", "had",  "has",  "have",  "i",     "in",   "is",
        "it",   "its",   "me",    "my",   "of",   "on",   "or",   "so",   "that",  "the",   "their", "there",
        "they", "this",  "to",    "was",  "we",   "were", "what", "when", "which", "with",  "you",  "your"};
    return std::find(kStop.begin(), kStop.end(), w) != kStop.end();
  }

  /// Lowercased alphanumeric runs; bytes >= 0x80 count as word characters so UTF-8 text survives.
  static std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
      const auto u = static_cast<unsigned char>(c);
      if (std::isalnum(u) || u >= 0x80) {
        cur.push_back(static_cast<char>(std::tolower(u)));
      } else if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }

 private:
  void accumulate(Vector& v, std::string_view feature, double weight) const {
    SplitMix64 rng(fnv1a64(feature) ^ seed_);
    for (double& x : v) x += weight * (2.0 * rng.uniform() - 1.0);
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace evmem
