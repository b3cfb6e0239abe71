#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "evmem/core/types.hpp"
#include "evmem/error.hpp"

namespace evmem {

/// One construction step's input: all utterances of one session, in stream order.
struct Session {
  std::string id;
  std::vector<Utterance> utterances;
};

struct JsonlReadResult {
  std::vector<Session> sessions;  // in order of first appearance
  std::size_t skipped_lines = 0;
  std::vector<std::string> warnings;
};

inline Utterance utterance_from_json(const nlohmann::json& j) {
  auto str = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key) || j[key].is_null()) {
      if (required) throw Error(ErrorCode::validation, std::string("utterance lacks '") + key + "'");
      return {};
    }
    if (j[key].is_string()) return j[key].get<std::string>();
    if (j[key].is_number()) return j[key].dump();
    throw Error(ErrorCode::validation, std::string("utterance field '") + key + "' is not a string");
  };
  if (!j.is_object()) throw Error(ErrorCode::validation, "utterance is not a JSON object");
  Utterance u;
  u.session_id = str("session_id", true);
  u.id = str("utterance_id", true);
  u.speaker = str("speaker", false);
  u.timestamp = str("timestamp", false);
  u.text = str("text", true);
  if (u.id.empty()) throw Error(ErrorCode::validation, "utterance id is empty");
  if (u.text.empty()) throw Error(ErrorCode::validation, "utterance " + u.id + " has empty text");
  return u;
}

/// Reads utterance JSON Lines and groups them by session. Malformed lines and
/// duplicate ids within a session are skipped with a warning.
inline JsonlReadResult read_utterances_jsonl(std::istream& in) {
  JsonlReadResult out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::set<std::string>> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto skip = [&](const std::string& why) {
      ++out.skipped_lines;
      out.warnings.push_back("line " + std::to_string(lineno) + ": " + why);
      spdlog::warn("line {}: {}", lineno, why);
    };
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      skip("not valid JSON");
      continue;
    }
    Utterance u;
    try {
      u = utterance_from_json(j);
    } catch (const Error& e) {
      skip(e.what());
      continue;
    }
    if (!seen_ids[u.session_id].insert(u.id).second) {
      skip("duplicate utterance id " + u.id + " in session " + u.session_id);
      continue;
    }
    auto [it, fresh] = index.try_emplace(u.session_id, out.sessions.size());
    if (fresh) out.sessions.push_back({u.session_id, {}});
    out.sessions[it->second].utterances.push_back(std::move(u));
  }
  return out;
}

inline JsonlReadResult read_utterances_jsonl_text(const std::string& text) {
  std::istringstream in(text);
  return read_utterances_jsonl(in);
}

inline JsonlReadResult read_utterances_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::validation, "cannot open " + path);
  return read_utterances_jsonl(in);
}

}  // namespace evmem
