#pragma once

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "evmem/core/vector_math.hpp"

namespace evmem {

inline constexpr std::size_t kMaxParticipants = 3;

/// One text unit of an observation stream (a dialog turn, a document chunk).
struct Utterance {
  std::string id;
  std::string speaker;
  std::string timestamp;
  std::string text;
  std::string session_id;
};

/// A coherent experience unit and the node type of the event graph.
struct Event {
  std::string id;
  std::vector<std::string> span;          // utterance ids, in stream order
  std::string time_info;                  // normalized time text as extracted ("last summer", "7 May 2023")
  std::string summary;
  std::vector<std::string> participants;  // at most kMaxParticipants
  Vector embedding;                       // embedding of `summary`
  std::set<std::string> session_ids;
  std::string observed_at;                // timestamp of the earliest utterance in `span`

  bool operator==(const Event&) const = default;
};

/// Typed logical edge. Labels are lowercase snake_case tokens from an open set.
struct Relation {
  std::string src;
  std::string dst;
  std::string label;
  std::vector<std::string> evidence;  // utterance ids

  bool operator==(const Relation&) const = default;
};

enum class Direction { out, in };

inline std::string_view to_string(Direction d) { return d == Direction::out ? "out" : "in"; }

struct Neighbor {
  Event event;
  std::string label;
  Direction direction;
};

struct Topic {
  std::string id;
  Vector centroid;
  std::vector<std::string> members;  // sorted

  std::size_t member_count() const { return members.size(); }
  bool operator==(const Topic&) const = default;
};

inline bool is_snake_token(std::string_view s) {
  if (s.empty() || s.front() == '_' || s.back() == '_') return false;
  for (char c : s) {
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  }
  return true;
}

/// Lowercases and maps runs of spaces, hyphens and other separators to a single
/// underscore: "Temporal Before" -> "temporal_before". May return an empty string.
inline std::string normalize_label(std::string_view raw) {
  std::string out;
  bool pending_sep = false;
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

inline void to_json(nlohmann::json& j, const Utterance& u) {
  j = {{"session_id", u.session_id}, {"utterance_id", u.id}, {"speaker", u.speaker},
       {"timestamp", u.timestamp},   {"text", u.text}};
}

inline void to_json(nlohmann::json& j, const Event& e) {
  j = {{"id", e.id},
       {"span", e.span},
       {"time_info", e.time_info},
       {"summary", e.summary},
       {"participants", e.participants},
       {"embedding", e.embedding},
       {"session_ids", e.session_ids},
       {"observed_at", e.observed_at}};
}

inline void from_json(const nlohmann::json& j, Event& e) {
  j.at("id").get_to(e.id);
  j.at("span").get_to(e.span);
  j.at("time_info").get_to(e.time_info);
  j.at("summary").get_to(e.summary);
  j.at("participants").get_to(e.participants);
  j.at("embedding").get_to(e.embedding);
  j.at("session_ids").get_to(e.session_ids);
  e.observed_at = j.value("observed_at", std::string{});
}

inline void to_json(nlohmann::json& j, const Relation& r) {
  j = {{"src", r.src}, {"dst", r.dst}, {"label", r.label}, {"evidence", r.evidence}};
}

inline void from_json(const nlohmann::json& j, Relation& r) {
  j.at("src").get_to(r.src);
  j.at("dst").get_to(r.dst);
  j.at("label").get_to(r.label);
  r.evidence = j.value("evidence", std::vector<std::string>{});
}

inline void to_json(nlohmann::json& j, const Topic& t) {
  j = {{"id", t.id}, {"centroid", t.centroid}, {"members", t.members}, {"member_count", t.member_count()}};
}

inline void from_json(const nlohmann::json& j, Topic& t) {
  j.at("id").get_to(t.id);
  j.at("centroid").get_to(t.centroid);
  j.at("members").get_to(t.members);
}

}  // namespace evmem
