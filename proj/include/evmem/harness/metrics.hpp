#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace evmem {

namespace detail {

inline std::string lower_no_punct(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

inline std::map<std::string, int> bag(const std::vector<std::string>& tokens) {
  std::map<std::string, int> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

}  // namespace detail

/// Answer normalization for F1: lowercase, drop ASCII punctuation, drop the
/// articles a/an/the, split on whitespace.
inline std::vector<std::string> f1_tokens(std::string_view text) {
  auto words = detail::whitespace_tokens(detail::lower_no_punct(text));
  std::erase_if(words, [](const std::string& w) { return w == "a" || w == "an" || w == "the"; });
  return words;
}

/// Tokens for BLEU-1: lowercase, drop ASCII punctuation, split on whitespace.
inline std::vector<std::string> bleu_tokens(std::string_view text) {
  return detail::whitespace_tokens(detail::lower_no_punct(text));
}

inline double token_f1(std::string_view prediction, std::string_view gold) {
  const auto p = f1_tokens(prediction);
  const auto g = f1_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  const auto gc = detail::bag(g);
  int common = 0;
  for (const auto& [tok, n] : detail::bag(p)) {
    auto it = gc.find(tok);
    if (it != gc.end()) common += std::min(n, it->second);
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

/// Clipped unigram precision times the brevity penalty min(1, exp(1 - |gold|/|pred|)).
inline double bleu1(std::string_view prediction, std::string_view gold) {
  const auto p = bleu_tokens(prediction);
  const auto g = bleu_tokens(gold);
  if (p.empty() || g.empty()) return 0.0;
  const auto gc = detail::bag(g);
  int clipped = 0;
  for (const auto& [tok, n] : detail::bag(p)) {
    auto it = gc.find(tok);
    if (it != gc.end()) clipped += std::min(n, it->second);
  }
  const double precision = static_cast<double>(clipped) / static_cast<double>(p.size());
  const double bp =
      p.size() > g.size() ? 1.0 : std::exp(1.0 - static_cast<double>(g.size()) / static_cast<double>(p.size()));
  return precision * bp;
}

}  // namespace evmem
