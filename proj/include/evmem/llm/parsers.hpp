#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "evmem/error.hpp"

// Parsers for each prompt family's response grammar. All of them are total:
// they return a value or throw evmem::Error, whatever the input bytes are.
// Recoverable deviations are repaired and reported in `warnings`.

namespace evmem {

enum class ActionKind { skip, expand, answer };

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::skip: return "SKIP";
    case ActionKind::expand: return "EXPAND";
    case ActionKind::answer: return "ANSWER";
  }
  return "?";
}

struct Action {
  ActionKind kind = ActionKind::skip;
  std::vector<std::string> next_nodes;
  std::vector<int> satisfied_subgoals;  // 1-based
  std::string reasoning;
  std::vector<std::string> warnings;
};

struct RawEventRecord {
  std::string provisional_id;
  std::string summary;
  std::vector<std::string> utterance_ids;
  std::string time;
  std::vector<std::string> people;
};

struct EventExtraction {
  std::vector<RawEventRecord> events;
  bool count_in_range = true;  // 6..10 events requested by the prompt
  std::vector<std::string> warnings;
};

struct RawRelationRecord {
  std::string source;
  std::string target;
  std::string type;
  std::vector<std::string> evidence;
};

struct RelationExtraction {
  std::vector<RawRelationRecord> relations;
  std::vector<std::string> warnings;
};

struct CoreferenceVerdict {
  bool same_event = false;
  bool has_overlap = false;
  std::optional<std::string> relation_type;
  std::string reasoning;
  std::vector<std::string> warnings;
};

struct RefinedQuery {
  std::string query;
  std::vector<int> target_subgoals;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kMaxNextNodes = 3;
inline constexpr std::size_t kMinExtractedEvents = 6;
inline constexpr std::size_t kMaxExtractedEvents = 10;

namespace detail {

inline void warn(std::vector<std::string>& sink, std::string msg) {
  spdlog::warn("{}", msg);
  sink.push_back(std::move(msg));
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    out.push_back(text.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

/// Strips markdown decoration LLMs put around labels: "**ACTION:**", "- ACTION:", "## ACTION:".
inline std::string_view strip_decoration(std::string_view line) {
  line = trim(line);
  while (!line.empty() && (line.front() == '*' || line.front() == '#' || line.front() == '-' || line.front() == '>' ||
                           line.front() == '`' || line.front() == '_'))
    line.remove_prefix(1);
  return trim(line);
}

/// If `line` starts with `label` (case-insensitive) followed by ':' returns the
/// value after the colon, with markdown emphasis removed.
inline std::optional<std::string_view> labeled_value(std::string_view line, std::string_view label) {
  line = strip_decoration(line);
  if (line.size() < label.size()) return std::nullopt;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const auto a = static_cast<unsigned char>(line[i]);
    const auto b = static_cast<unsigned char>(label[i]);
    if (std::tolower(a) != std::tolower(b)) return std::nullopt;
  }
  auto rest = line.substr(label.size());
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '_' || rest.front() == ' ')) rest.remove_prefix(1);
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  rest.remove_prefix(1);
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '_')) rest.remove_prefix(1);
  return trim(rest);
}

/// "[E1, 'E2', \"E3\"]" or "E1, E2" -> {"E1","E2","E3"}. "NONE", "[]" and "" -> {}.
inline std::vector<std::string> split_id_list(std::string_view v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    const auto close = v.find(']');
    v = close == std::string_view::npos ? v.substr(1) : v.substr(1, close - 1);
  }
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    while (!item.empty() && (item.front() == '"' || item.front() == '\'' || item.front() == '`' || item.front() == '['))
      item.remove_prefix(1);
    while (!item.empty() && (item.back() == '"' || item.back() == '\'' || item.back() == '`' || item.back() == ']' ||
                             item.back() == '.'))
      item.remove_suffix(1);
    item = trim(item);
    if (!item.empty() && lower(item) != "none") out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Integers appearing in a list value; non-numeric items are skipped.
inline std::vector<long long> split_int_list(std::string_view v) {
  std::vector<long long> out;
  for (const auto& item : split_id_list(v)) {
    std::size_t i = 0;
    while (i < item.size() && !std::isdigit(static_cast<unsigned char>(item[i])) && item[i] != '-') ++i;
    if (i == item.size()) continue;
    try {
      std::size_t used = 0;
      const long long n = std::stoll(item.substr(i), &used);
      out.push_back(n);
    } catch (const std::exception&) {
      // out of range or no digits after '-'
    }
  }
  return out;
}

/// Accepts one bare JSON object, optionally inside a single ``` fence.
/// Anything else around it (prose, a second object) is a parse error.
inline nlohmann::json strict_json_object(std::string_view text, std::string_view what) {
  auto body = trim(text);
  if (body.substr(0, 3) == "```") {
    const auto first_nl = body.find('\n');
    if (first_nl == std::string_view::npos) throw Error(ErrorCode::parse, std::string(what) + ": unterminated code fence");
    body.remove_prefix(first_nl + 1);
    body = trim(body);
    if (body.size() < 3 || body.substr(body.size() - 3) != "```")
      throw Error(ErrorCode::parse, std::string(what) + ": unterminated code fence");
    body.remove_suffix(3);
    body = trim(body);
  }
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::parse, std::string(what) + ": not exactly one JSON document");
  if (!doc.is_object()) throw Error(ErrorCode::parse, std::string(what) + ": top-level JSON value is not an object");
  return doc;
}

inline std::string string_field(const nlohmann::json& obj, const char* key, std::string_view what, bool required) {
  if (!obj.contains(key) || obj[key].is_null()) {
    if (required) throw Error(ErrorCode::parse, std::string(what) + ": missing '" + key + "'");
    return {};
  }
  const auto& v = obj[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw Error(ErrorCode::parse, std::string(what) + ": '" + key + "' is not a string");
}

inline std::vector<std::string> string_list_field(const nlohmann::json& obj, const char* key, std::string_view what,
                                                  bool required) {
  if (!obj.contains(key) || obj[key].is_null()) {
    if (required) throw Error(ErrorCode::parse, std::string(what) + ": missing '" + key + "'");
    return {};
  }
  const auto& v = obj[key];
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
    return out;
  }
  if (!v.is_array()) throw Error(ErrorCode::parse, std::string(what) + ": '" + key + "' is not a list");
  for (const auto& item : v) {
    if (item.is_string()) {
      out.push_back(item.get<std::string>());
    } else if (item.is_number()) {
      out.push_back(item.dump());
    } else {
      throw Error(ErrorCode::parse, std::string(what) + ": '" + key + "' holds a non-string item");
    }
  }
  return out;
}

}  // namespace detail

/// Event-extraction reply: {"events": [{"id","summary","utterance_ids","time","people"}]}.
inline EventExtraction parse_event_extraction(std::string_view text) {
  constexpr std::string_view what = "event extraction";
  const auto doc = detail::strict_json_object(text, what);
  if (!doc.contains("events") || !doc["events"].is_array())
    throw Error(ErrorCode::parse, "event extraction: missing 'events' list");
  EventExtraction out;
  std::size_t index = 0;
  for (const auto& item : doc["events"]) {
    ++index;
    if (!item.is_object()) throw Error(ErrorCode::parse, "event extraction: event " + std::to_string(index) + " is not an object");
    RawEventRecord r;
    r.provisional_id = detail::string_field(item, "id", what, false);
    r.summary = std::string(detail::trim(detail::string_field(item, "summary", what, true)));
    if (r.summary.empty()) throw Error(ErrorCode::parse, "event extraction: event " + std::to_string(index) + " has an empty summary");
    r.utterance_ids = detail::string_list_field(item, "utterance_ids", what, true);
    r.time = detail::string_field(item, "time", what, false);
    r.people = detail::string_list_field(item, "people", what, false);
    if (r.people.size() > 3) {
      detail::warn(out.warnings, "event " + std::to_string(index) + " lists " + std::to_string(r.people.size()) +
                                     " people; keeping the first 3");
      r.people.resize(3);
    }
    out.events.push_back(std::move(r));
  }
  out.count_in_range = out.events.size() >= kMinExtractedEvents && out.events.size() <= kMaxExtractedEvents;
  if (!out.count_in_range) {
    detail::warn(out.warnings, "extraction returned " + std::to_string(out.events.size()) + " events, expected 6-10");
  }
  return out;
}

/// Relation-extraction reply: {"relations": [{"source","target","type","evidence"}]}.
inline RelationExtraction parse_relation_extraction(std::string_view text) {
  constexpr std::string_view what = "relation extraction";
  const auto doc = detail::strict_json_object(text, what);
  if (!doc.contains("relations")) throw Error(ErrorCode::parse, "relation extraction: missing 'relations'");
  RelationExtraction out;
  const auto& rel = doc["relations"];
  if (rel.is_null() || (rel.is_object() && rel.empty())) return out;
  if (!rel.is_array()) throw Error(ErrorCode::parse, "relation extraction: 'relations' is not a list");
  for (const auto& item : rel) {
    if (!item.is_object()) throw Error(ErrorCode::parse, "relation extraction: relation is not an object");
    RawRelationRecord r;
    r.source = detail::string_field(item, "source", what, true);
    r.target = detail::string_field(item, "target", what, true);
    r.type = detail::string_field(item, "type", what, true);
    r.evidence = detail::string_list_field(item, "evidence", what, false);
    out.relations.push_back(std::move(r));
  }
  return out;
}

/// Action-decision reply. `valid_node_ids` are the ids the model may name
/// (the current node's neighbors); `n_subgoals` bounds the satisfied indices.
inline Action parse_action_decision(std::string_view text, const std::set<std::string>& valid_node_ids,
                                    std::size_t n_subgoals) {
  Action a;
  std::optional<std::string_view> action_v, next_v, sat_v;
  std::string reasoning;
  bool in_reasoning = false;
  for (auto line : detail::lines(text)) {
    if (!action_v) {
      if (auto v = detail::labeled_value(line, "ACTION")) {
        action_v = v;
        in_reasoning = false;
        continue;
      }
    }
    if (auto v = detail::labeled_value(line, "NEXT_NODES"); v && !next_v) {
      next_v = v;
      in_reasoning = false;
    } else if (auto s = detail::labeled_value(line, "SATISFIED_SUBGOALS"); s && !sat_v) {
      sat_v = s;
      in_reasoning = false;
    } else if (auto r = detail::labeled_value(line, "REASONING")) {
      reasoning = std::string(*r);
      in_reasoning = true;
    } else if (in_reasoning) {
      reasoning += "\n";
      reasoning += line;
    }
  }
  if (!action_v) throw Error(ErrorCode::parse, "action decision: missing ACTION line");

  auto token = detail::lower(detail::trim(*action_v));
  token.erase(std::remove_if(token.begin(), token.end(), [](char c) { return c == '[' || c == ']' || c == '*' || c == '`'; }),
              token.end());
  token = std::string(detail::trim(token));
  const auto word_end = token.find_first_of(" \t.,;:(");
  token = token.substr(0, word_end);
  if (token == "skip") {
    a.kind = ActionKind::skip;
  } else if (token == "expand") {
    a.kind = ActionKind::expand;
  } else if (token == "answer") {
    a.kind = ActionKind::answer;
  } else {
    throw Error(ErrorCode::parse, "action decision: unrecognized action '" + std::string(*action_v) + "'");
  }
  a.reasoning = std::string(detail::trim(reasoning));

  if (next_v) {
    std::set<std::string> seen;
    for (auto& id : detail::split_id_list(*next_v)) {
      if (!valid_node_ids.contains(id)) {
        detail::warn(a.warnings, "dropping unknown next node '" + id + "'");
        continue;
      }
      if (seen.insert(id).second) a.next_nodes.push_back(std::move(id));
    }
  } else {
    detail::warn(a.warnings, "missing NEXT_NODES line; treating as NONE");
  }
  if (a.next_nodes.size() > kMaxNextNodes) {
    detail::warn(a.warnings, "more than 3 next nodes; keeping the first 3");
    a.next_nodes.resize(kMaxNextNodes);
  }

  if (sat_v) {
    std::set<int> seen;
    for (long long n : detail::split_int_list(*sat_v)) {
      if (n < 1 || n > static_cast<long long>(n_subgoals)) {
        detail::warn(a.warnings, "dropping out-of-range sub-goal index " + std::to_string(n));
        continue;
      }
      if (seen.insert(static_cast<int>(n)).second) a.satisfied_subgoals.push_back(static_cast<int>(n));
    }
  }

  if (a.kind == ActionKind::skip && !a.satisfied_subgoals.empty()) {
    detail::warn(a.warnings, "SKIP listed satisfied sub-goals; clearing them");
    a.satisfied_subgoals.clear();
  }
  if (a.kind == ActionKind::answer && !a.next_nodes.empty()) {
    detail::warn(a.warnings, "ANSWER listed next nodes; clearing them");
    a.next_nodes.clear();
  }
  return a;
}

/// Planner reply: "Sub-goal N: ..." lines, in order. Keeps at most `max_goals`;
/// fewer than `min_goals` is an error.
inline std::vector<std::string> parse_subgoals(std::string_view text, std::size_t min_goals = 2,
                                               std::size_t max_goals = 5) {
  std::vector<std::string> out;
  for (auto line : detail::lines(text)) {
    auto l = detail::strip_decoration(line);
    const auto lowered = detail::lower(l.substr(0, std::min<std::size_t>(l.size(), 9)));
    std::size_t pos = 0;
    if (lowered.rfind("sub-goal", 0) == 0) {
      pos = 8;
    } else if (lowered.rfind("subgoal", 0) == 0) {
      pos = 7;
    } else {
      continue;
    }
    while (pos < l.size() && l[pos] == ' ') ++pos;
    const auto digits_start = pos;
    while (pos < l.size() && std::isdigit(static_cast<unsigned char>(l[pos]))) ++pos;
    if (pos == digits_start) continue;
    while (pos < l.size() && (l[pos] == '*' || l[pos] == ' ')) ++pos;
    if (pos >= l.size() || l[pos] != ':') continue;
    auto goal = detail::trim(l.substr(pos + 1));
    while (!goal.empty() && goal.front() == '*') goal.remove_prefix(1);
    goal = detail::trim(goal);
    if (goal.size() >= 2 && goal.front() == '[' && goal.back() == ']') goal = detail::trim(goal.substr(1, goal.size() - 2));
    if (!goal.empty()) out.emplace_back(goal);
  }
  if (out.size() < min_goals) {
    throw Error(ErrorCode::parse, "planner produced " + std::to_string(out.size()) + " sub-goals, need at least " +
                                      std::to_string(min_goals));
  }
  if (out.size() > max_goals) {
    spdlog::warn("planner produced {} sub-goals; keeping the first {}", out.size(), max_goals);
    out.resize(max_goals);
  }
  return out;
}

/// Selection reply: "Selected Nodes: [...]". Unknown ids are dropped and the
/// result truncated to `cap`; an empty selection is legal.
inline std::vector<std::string> parse_node_selection(std::string_view text, const std::set<std::string>& valid_ids,
                                                     std::size_t cap) {
  for (auto line : detail::lines(text)) {
    auto v = detail::labeled_value(line, "Selected Nodes");
    if (!v) continue;
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& id : detail::split_id_list(*v)) {
      if (valid_ids.contains(id) && seen.insert(id).second) out.push_back(std::move(id));
    }
    if (out.size() > cap) out.resize(cap);
    return out;
  }
  throw Error(ErrorCode::parse, "node selection: missing 'Selected Nodes' line");
}

/// Refinement reply: "New Query: ..." and "Target Sub-goals: [...]".
inline RefinedQuery parse_refined_query(std::string_view text) {
  RefinedQuery out;
  bool have_query = false;
  bool have_targets = false;
  for (auto line : detail::lines(text)) {
    if (auto v = detail::labeled_value(line, "New Query"); v && !have_query) {
      auto q = *v;
      if (q.size() >= 2 && q.front() == '[' && q.back() == ']') q = q.substr(1, q.size() - 2);
      if (q.size() >= 2 && (q.front() == '"' || q.front() == '\'') && q.back() == q.front()) q = q.substr(1, q.size() - 2);
      out.query = std::string(detail::trim(q));
      have_query = true;
    } else if (auto t = detail::labeled_value(line, "Target Sub-goals"); t && !have_targets) {
      for (long long n : detail::split_int_list(*t))
        if (n >= 1 && n <= 1000) out.target_subgoals.push_back(static_cast<int>(n));
      have_targets = true;
    }
  }
  if (!have_query) throw Error(ErrorCode::parse, "refinement: missing 'New Query' line");
  if (out.query.empty()) throw Error(ErrorCode::parse, "refinement: empty query");
  if (!have_targets) detail::warn(out.warnings, "refinement reply has no 'Target Sub-goals' line");
  return out;
}

/// Coreference reply: strict JSON with same_event, has_overlap, relation_type, reasoning.
inline CoreferenceVerdict parse_coreference(std::string_view text) {
  constexpr std::string_view what = "coreference";
  const auto doc = detail::strict_json_object(text, what);
  CoreferenceVerdict v;
  for (const char* key : {"same_event", "has_overlap", "relation_type", "reasoning"})
    if (!doc.contains(key)) throw Error(ErrorCode::parse, std::string("coreference: missing '") + key + "'");
  if (!doc["same_event"].is_boolean() || !doc["has_overlap"].is_boolean())
    throw Error(ErrorCode::parse, "coreference: same_event and has_overlap must be booleans");
  v.same_event = doc["same_event"].get<bool>();
  v.has_overlap = doc["has_overlap"].get<bool>();
  const auto& rt = doc["relation_type"];
  if (rt.is_string()) {
    const auto s = std::string(detail::trim(rt.get<std::string>()));
    if (!s.empty() && detail::lower(s) != "null" && detail::lower(s) != "none") v.relation_type = s;
  } else if (!rt.is_null()) {
    throw Error(ErrorCode::parse, "coreference: relation_type must be a string or null");
  }
  v.reasoning = detail::string_field(doc, "reasoning", what, false);
  if (v.same_event && !v.has_overlap) {
    detail::warn(v.warnings, "coreference verdict same_event without has_overlap; setting has_overlap");
    v.has_overlap = true;
  }
  return v;
}

}  // namespace evmem
