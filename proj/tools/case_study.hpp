#pragma once

// Scripted case study: three sessions about moving to Chicago and taking up
// art, plus the multi-hop question "what kinds of artworks...". The script
// provider answers every prompt from a fixed plan and records what it said,
// so the same run can be replayed later from the recorded keys alone.

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evmem/evmem.hpp"

namespace evmem::case_study {

inline constexpr std::string_view kQuestion =
    "What kinds of artworks did the speaker mention creating after moving to the new city?";
inline constexpr std::string_view kRefinedQuery =
    "What specific forms of art did the speaker create after moving to the new city?";
inline constexpr std::string_view kAnswer = "The speaker created paintings and stained glass artworks after moving.";
inline constexpr std::string_view kGold = "paintings and stained glass artworks";

inline const std::vector<std::string>& subgoals() {
  static const std::vector<std::string> s{
      "Identify the event describing the speaker's move to a new city.",
      "Find events mentioning artistic or creative activities after the move.",
      "Extract the specific types of artworks mentioned.",
  };
  return s;
}

struct ScriptedEvent {
  std::string key;
  std::string summary;
  std::vector<std::string> utterances;  // local utterance numbers, "u1"...
  std::string time;
};

struct ScriptedSession {
  std::string id;
  std::string date;
  std::vector<std::pair<std::string, std::string>> lines;  // speaker, text
  std::vector<ScriptedEvent> events;
  std::vector<std::tuple<std::string, std::string, std::string>> relations;  // src key, dst key, label
};

inline const std::vector<ScriptedSession>& script() {
  static const std::vector<ScriptedSession> s{
      {"s1",
       "2023-05-08",
       {{"Jordan", "Guess what, I moved to Chicago last summer for a new job!"},
        {"Sam", "That's huge! How is the city treating you?"},
        {"Jordan", "Great so far. I met my new coworkers at the downtown office and they're lovely."},
        {"Jordan", "I found an apartment near the lake, the view is amazing."},
        {"Jordan", "And I have been spending weekends exploring art museums."},
        {"Sam", "Any favorites?"},
        {"Jordan", "The museums got me curious, so I visited a crowded art fair downtown."}},
       {{"move", "Moved to Chicago last summer for a new job.", {"u1", "u2"}, "last summer"},
        {"coworkers", "Met new coworkers at the downtown office.", {"u3"}, ""},
        {"apartment", "Found an apartment near the lake.", {"u4"}, ""},
        {"museum", "I have been spending weekends exploring art museums.", {"u5", "u6"}, "weekends"},
        {"artfair", "Visited a crowded art fair downtown.", {"u7"}, ""}},
       {{"move", "apartment", "enablement"}, {"move", "coworkers", "causal"}, {"museum", "artfair", "motivation"}}},
      {"s2",
       "2023-06-12",
       {{"Jordan", "Remember the apartment near the lake I found? The light there is perfect."},
        {"Jordan", "I started painting landscapes in my apartment."},
        {"Sam", "What do you paint with?"},
        {"Jordan", "I bought a set of oil paints from a local shop."},
        {"Jordan", "I also tried cooking deep-dish pizza at home, total disaster."},
        {"Jordan", "Oh and I started a weekly running routine along the lakefront."}},
       {{"apartment", "Found an apartment near the lake.", {"u1"}, ""},
        {"paint", "I started painting landscapes in my apartment.", {"u2"}, ""},
        {"oilpaints", "Bought a set of oil paints from a local shop.", {"u3", "u4"}, ""},
        {"cooking", "Tried cooking deep-dish pizza at home.", {"u5"}, ""},
        {"running", "Started a weekly running routine along the lakefront.", {"u6"}, "weekly"}},
       {{"apartment", "paint", "enablement"}, {"paint", "oilpaints", "follow_up"}}},
      {"s3",
       "2023-07-20",
       {{"Jordan", "It's been a year since I moved to Chicago last summer for a new job, time flies."},
        {"Jordan", "I signed up for a weekend art class at the community center."},
        {"Jordan", "In the class I also experimented with stained glass designs."},
        {"Jordan", "I made friends with other artists in the class."}},
       {{"move", "Moved to Chicago last summer for a new job.", {"u1"}, "last summer"},
        {"artclass", "Signed up for a weekend art class at the community center.", {"u2"}, ""},
        {"glass", "I also experimented with stained glass designs.", {"u3"}, ""},
        {"friends", "Made friends with other artists in the class.", {"u4"}, ""}},
       {{"artclass", "glass", "enablement"}, {"artclass", "friends", "causal"}}},
  };
  return s;
}

struct Decision {
  std::string action;
  std::vector<std::string> next;  // event keys
  std::vector<int> satisfied;
};

/// Per-node decisions for the question. Round one starts from the move, the
/// museums and the apartment; round two from the art-class cluster.
inline const std::map<std::string, Decision>& decisions() {
  static const std::map<std::string, Decision> d{
      {"move", {"EXPAND", {"apartment", "coworkers"}, {1}}},
      {"museum", {"EXPAND", {"artfair"}, {}}},
      {"apartment", {"EXPAND", {"paint"}, {}}},
      {"paint", {"EXPAND", {"oilpaints"}, {2}}},
      {"artfair", {"SKIP", {}, {}}},
      {"oilpaints", {"EXPAND", {}, {}}},
      {"coworkers", {"SKIP", {}, {}}},
      {"glass", {"EXPAND", {}, {3}}},
      {"artclass", {"EXPAND", {}, {2}}},
      {"friends", {"SKIP", {}, {}}},
      {"cooking", {"SKIP", {}, {}}},
      {"running", {"SKIP", {}, {}}},
  };
  return d;
}

inline const std::vector<std::string>& first_round_starts() {
  static const std::vector<std::string> s{"move", "museum", "apartment"};
  return s;
}
inline const std::vector<std::string>& second_round_starts() {
  static const std::vector<std::string> s{"glass", "artclass", "friends"};
  return s;
}

inline Config config() {
  Config c;
  c.id_seed = 7;
  c.embedding_dim = 256;  // the 64-dim hash embedder is too noisy to rank twelve short summaries
  return c;
}

inline std::vector<Session> sessions() {
  std::vector<Session> out;
  for (const auto& s : script()) {
    Session session{s.id, {}};
    int minute = 0;
    for (std::size_t i = 0; i < s.lines.size(); ++i) {
      Utterance u;
      u.session_id = s.id;
      u.id = s.id + "-u" + std::to_string(i + 1);
      u.speaker = s.lines[i].first;
      char ts[32];
      std::snprintf(ts, sizeof ts, "%sT18:%02d", s.date.c_str(), minute);
      minute += 2;
      u.timestamp = ts;
      u.text = s.lines[i].second;
      session.utterances.push_back(std::move(u));
    }
    out.push_back(std::move(session));
  }
  return out;
}

inline std::string dialog_jsonl() {
  std::string out;
  for (const auto& s : sessions())
    for (const auto& u : s.utterances)
      out += nlohmann::json{{"session_id", u.session_id}, {"utterance_id", u.id}, {"speaker", u.speaker},
                            {"timestamp", u.timestamp}, {"text", u.text}}
                 .dump() +
             "\n";
  return out;
}

/// Answers every prompt of the case study from the script above and records
/// each (replay key, response) pair it hands out.
class ScriptWriter final : public ChatProvider {
 public:
  explicit ScriptWriter(const Memory& memory) : memory_(memory) {}

  ChatResponse chat(const ChatRequest& req) override {
    std::string text = respond(req);
    std::lock_guard lock(mu_);
    recorded_[req.replay_key] = text;
    return {std::move(text), {}};
  }

  const std::map<std::string, std::string>& recorded() const { return recorded_; }

  std::string replay_jsonl() const {
    std::string out;
    for (const auto& [k, v] : recorded_) out += nlohmann::json{{"key", k}, {"response_text", v}}.dump() + "\n";
    return out;
  }

  /// Event id holding the scripted summary for `key`.
  std::string id_of(const std::string& key) const {
    std::string summary;
    for (const auto& s : script())
      for (const auto& e : s.events)
        if (e.key == key) summary = e.summary;
    for (const auto& [id, e] : memory_.store.events())
      if (e.summary == summary) return id;
    throw Error(ErrorCode::unknown_id, "case study event '" + key + "' is not in the store");
  }

  std::string key_of(const std::string& id) const {
    const auto& summary = memory_.store.event(id).summary;
    for (const auto& s : script())
      for (const auto& e : s.events)
        if (e.summary == summary) return e.key;
    throw Error(ErrorCode::unknown_id, "event " + id + " is not part of the case study");
  }

 private:
  static const ScriptedSession& session(const std::string& id) {
    for (const auto& s : script())
      if (s.id == id) return s;
    throw Error(ErrorCode::scripted_miss, "unknown case-study session " + id);
  }

  static std::string provisional(const ScriptedSession& s, const std::string& key) {
    for (std::size_t i = 0; i < s.events.size(); ++i)
      if (s.events[i].key == key) return "E" + std::to_string(i + 1);
    throw Error(ErrorCode::scripted_miss, "no event " + key + " in session " + s.id);
  }

  std::string ids_list(const std::vector<std::string>& keys) const {
    std::string out = "[";
    for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? ", " : "") + id_of(keys[i]);
    return out + "]";
  }

  static std::string ints_list(const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
  }

  std::string respond(const ChatRequest& req) const {
    const auto& b = req.salient;
    auto get = [&](const char* k) {
      auto it = b.find(k);
      return it == b.end() ? std::string() : it->second;
    };
    const auto& t = req.template_id;
    if (t == tmpl::kEventExtraction) {
      const auto& s = session(get("session"));
      nlohmann::json events = nlohmann::json::array();
      for (std::size_t i = 0; i < s.events.size(); ++i) {
        const auto& e = s.events[i];
        std::vector<std::string> uids;
        for (const auto& u : e.utterances) uids.push_back(s.id + "-" + u);
        events.push_back({{"id", "E" + std::to_string(i + 1)},
                          {"summary", e.summary},
                          {"utterance_ids", uids},
                          {"time", e.time},
                          {"people", {"Jordan"}}});
      }
      return nlohmann::json{{"events", events}}.dump();
    }
    if (t == tmpl::kRelationExtraction) {
      const auto& s = session(get("session"));
      nlohmann::json rels = nlohmann::json::array();
      for (const auto& [src, dst, label] : s.relations)
        rels.push_back({{"source", provisional(s, src)}, {"target", provisional(s, dst)}, {"type", label},
                        {"evidence", nlohmann::json::array()}});
      return nlohmann::json{{"relations", rels}}.dump();
    }
    if (t == tmpl::kCoreference) {
      const bool same = get("event_a") == get("event_b");
      return nlohmann::json{{"same_event", same},
                            {"has_overlap", same},
                            {"relation_type", nullptr},
                            {"reasoning", same ? "Both describe the same occurrence." : "Different occurrences."}}
          .dump(2);
    }
    if (t == tmpl::kPlanning) {
      std::string out;
      for (std::size_t i = 0; i < subgoals().size(); ++i)
        out += "Sub-goal " + std::to_string(i + 1) + ": " + subgoals()[i] + "\n";
      return out;
    }
    if (t == tmpl::kNodeSelection) {
      const bool refined = get("question") == kRefinedQuery;
      return "Selected Nodes: " + ids_list(refined ? second_round_starts() : first_round_starts()) +
             "\nReasoning: these events cover the move and the speaker's creative activities.";
    }
    if (t == tmpl::kActionDecision) {
      const auto key = key_of(get("node"));
      const auto& d = decisions().at(key);
      return "ACTION: " + d.action + "\nNEXT_NODES: " + (d.next.empty() ? std::string("NONE") : ids_list(d.next)) +
             "\nSATISFIED_SUBGOALS: " + ints_list(d.satisfied) + "\nREASONING: scripted decision for " + key + ".";
    }
    if (t == tmpl::kQueryRefinement) {
      return "New Query: " + std::string(kRefinedQuery) + "\nTarget Sub-goals: [3]";
    }
    if (t == tmpl::kResponseGeneration) {
      return "ANSWER: " + std::string(kAnswer);
    }
    throw Error(ErrorCode::scripted_miss, "case study has no script for template " + t);
  }

  const Memory& memory_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

struct Built {
  Memory memory;
  std::string replay;
  SearchResult result;
};

/// Builds the store from the three sessions, runs the question once with a
/// single explorer, and returns the store plus every recorded response.
inline Built build() {
  Built out{Memory(config()), {}, {}};
  HashEmbedder embedder(static_cast<std::size_t>(out.memory.config.embedding_dim), out.memory.config.embedding_seed);
  ScriptWriter writer(out.memory);
  for (const auto& s : sessions()) construction_step(out.memory, s, writer, embedder);
  Config single = out.memory.config;
  single.num_explorers = 1;
  out.result = run_search(std::string(kQuestion), out.memory.store, out.memory.topics, single, writer, embedder);
  out.replay = writer.replay_jsonl();
  return out;
}

inline std::string questions_jsonl() {
  return nlohmann::json{{"question", kQuestion},
                        {"gold_answer", kGold},
                        {"category", "multi_hop"},
                        {"source_item", "case_study"}}
             .dump() +
         "\n";
}

}  // namespace evmem::case_study
