#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "evmem/config.hpp"
#include "evmem/core/event_store.hpp"
#include "evmem/topics/topic_layer.hpp"

namespace evmem {

inline constexpr int kSchemaVersion = 1;

/// Everything that persists between runs: the event graph, the topic layer
/// and the configuration it was built with.
struct Memory {
  Config config;
  EventStore store;
  TopicState topics;

  explicit Memory(Config c = {}) : config(std::move(c)), store(config.id_seed) {
    config.validate();
    store.set_dimension(static_cast<std::size_t>(config.embedding_dim));
    topics.recluster_period = config.recluster_period;
    topics.assign_threshold = config.topic_threshold;
    topics.seed = config.kmeans_seed;
  }

  bool operator==(const Memory& o) const { return store == o.store && topics == o.topics; }
};

inline nlohmann::json snapshot_json(const Memory& m) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& [id, e] : m.store.events()) events.push_back(e);
  nlohmann::json relations = nlohmann::json::array();
  for (const auto& [key, r] : m.store.relations()) relations.push_back(r);
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : m.topics.topics) topics.push_back(t);
  return {
      {"schema_version", kSchemaVersion},
      {"config_echo", m.config},
      {"events", std::move(events)},
      {"relations", std::move(relations)},
      {"topics", std::move(topics)},
      {"topic_state",
       {{"initialized", m.topics.initialized},
        {"step_counter", m.topics.step_counter},
        {"next_topic_seq", m.topics.next_topic_seq}}},
  };
}

/// Serializes to a UTF-8 JSON document. Keys and arrays are emitted in sorted
/// order, so two snapshots of the same memory are byte-identical.
inline std::string snapshot(const Memory& m) { return snapshot_json(m).dump(1) + "\n"; }

inline Memory load_snapshot_json(const nlohmann::json& doc) {
  auto bad = [](const std::string& msg) { return Error(ErrorCode::snapshot, msg); };
  if (!doc.is_object()) throw bad("snapshot is not a JSON object");
  for (const char* key : {"schema_version", "events", "relations", "topics", "config_echo"})
    if (!doc.contains(key)) throw bad(std::string("snapshot lacks '") + key + "'");
  if (!doc["schema_version"].is_number_integer()) throw bad("schema_version is not an integer");
  const int version = doc["schema_version"].get<int>();
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::version_mismatch,
                "snapshot schema " + std::to_string(version) + ", this build reads " + std::to_string(kSchemaVersion));
  }

  try {
    Memory m(config_from_json(doc["config_echo"]));
    for (const auto& je : doc["events"]) {
      Event e = je.get<Event>();
      if (e.id.empty()) throw bad("event without id");
      m.store.add_event(std::move(e));
    }
    for (const auto& jr : doc["relations"]) {
      Relation r = jr.get<Relation>();
      if (!m.store.contains(r.src) || !m.store.contains(r.dst))
        throw bad("relation " + r.src + " -> " + r.dst + " references a missing event");
      m.store.add_relation(std::move(r));
    }
    std::set<std::string> seen;
    for (const auto& jt : doc["topics"]) {
      Topic t = jt.get<Topic>();
      if (t.members.empty()) throw bad("topic " + t.id + " has no members");
      if (jt.contains("member_count") && jt["member_count"].get<std::size_t>() != t.members.size())
        throw bad("topic " + t.id + " member_count disagrees with members");
      std::sort(t.members.begin(), t.members.end());
      for (const auto& id : t.members) {
        if (!m.store.contains(id)) throw bad("topic " + t.id + " references missing event " + id);
        if (!seen.insert(id).second) throw bad("event " + id + " belongs to two topics");
      }
      if (t.centroid.size() != m.store.dimension()) throw bad("topic " + t.id + " centroid has wrong dimension");
      m.topics.topics.push_back(std::move(t));
    }
    if (doc.contains("topic_state")) {
      const auto& ts = doc["topic_state"];
      m.topics.initialized = ts.value("initialized", !m.topics.topics.empty());
      m.topics.step_counter = ts.value("step_counter", 0);
      m.topics.next_topic_seq = ts.value("next_topic_seq", std::uint64_t{m.topics.topics.size() + 1});
    } else {
      m.topics.initialized = !m.topics.topics.empty();
      m.topics.next_topic_seq = m.topics.topics.size() + 1;
    }
    if (m.topics.initialized && seen.size() != m.store.event_count())
      throw bad("topic layer does not cover every event");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("malformed snapshot: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::snapshot || e.code() == ErrorCode::version_mismatch) throw;
    throw bad(e.what());
  }
}

inline Memory load_snapshot(std::string_view text) {
  auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::snapshot, "snapshot is not valid JSON");
  return load_snapshot_json(doc);
}

inline void save_snapshot_file(const Memory& m, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::snapshot, "cannot write " + tmp);
    out << snapshot(m);
  }
  std::filesystem::rename(tmp, path);
}

inline Memory load_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::snapshot, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_snapshot(ss.str());
}

}  // namespace evmem
