#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "evmem/core/random.hpp"
#include "evmem/error.hpp"

namespace evmem {

using Bindings = std::map<std::string, std::string>;

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 1024;
  // Replay metadata; ignored by live providers.
  std::string template_id;
  std::string replay_key;
  Bindings salient;
};

struct TokenUsage {
  std::int64_t prompt = 0;
  std::int64_t completion = 0;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

/// Replay key: template id plus a hash of the bindings that identify the
/// decision (not the full prompt), so template wording can change without
/// invalidating recorded fixtures.
inline std::string replay_key(std::string_view template_id, const Bindings& salient) {
  std::uint64_t h = fnv1a64(template_id);
  for (const auto& [k, v] : salient) {
    h = fnv1a64(k, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(v, h);
    h = fnv1a64("\x1e", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(template_id) + ":" + buf;
}

/// Deterministic provider answering from recorded {key, response_text} records.
/// An unrecorded key is an error; it never improvises.
class ScriptedProvider final : public ChatProvider {
 public:
  ScriptedProvider() = default;
  ScriptedProvider(ScriptedProvider&& o) noexcept
      : responses_(std::move(o.responses_)), calls_(o.calls_.load()), misses_(o.misses_.load()) {}
  ScriptedProvider& operator=(ScriptedProvider&& o) noexcept {
    responses_ = std::move(o.responses_);
    calls_ = o.calls_.load();
    misses_ = o.misses_.load();
    return *this;
  }

  void add(std::string key, std::string response_text) {
    responses_.insert_or_assign(std::move(key), std::move(response_text));
  }

  /// Accepts a JSON array of records or JSON Lines with one record per line.
  static ScriptedProvider from_text(const std::string& text) {
    ScriptedProvider p;
    auto add_record = [&p](const nlohmann::json& rec) {
      if (!rec.is_object() || !rec.contains("key") || !rec.contains("response_text") || !rec["key"].is_string() ||
          !rec["response_text"].is_string())
        throw Error(ErrorCode::parse, "replay record needs string fields 'key' and 'response_text'");
      p.add(rec["key"].get<std::string>(), rec["response_text"].get<std::string>());
    };
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
      auto doc = nlohmann::json::parse(text, nullptr, false);
      if (doc.is_discarded()) throw Error(ErrorCode::parse, "replay fixture is not valid JSON");
      for (const auto& rec : doc) add_record(rec);
      return p;
    }
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded()) throw Error(ErrorCode::parse, "replay fixture line " + std::to_string(lineno) + " is not JSON");
      add_record(rec);
    }
    return p;
  }

  static ScriptedProvider from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::config, "cannot open replay fixture " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
  }

  ChatResponse chat(const ChatRequest& request) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    auto it = responses_.find(request.replay_key);
    if (it == responses_.end()) {
      misses_.fetch_add(1, std::memory_order_relaxed);
      throw Error(ErrorCode::scripted_miss, "no recorded response for key '" + request.replay_key + "'");
    }
    return {it->second, {static_cast<std::int64_t>(request.user.size() / 4),
                         static_cast<std::int64_t>(it->second.size() / 4)}};
  }

  std::size_t size() const { return responses_.size(); }
  std::size_t calls() const { return calls_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  std::map<std::string, std::string> responses_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> misses_{0};
};

/// Adapts a callable; handy for policies computed on the fly.
class FunctionProvider final : public ChatProvider {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}

  ChatResponse chat(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    return fn_(request);
  }

 private:
  std::mutex mu_;
  Fn fn_;
};

}  // namespace evmem
