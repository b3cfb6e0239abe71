#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "evmem/construction/construction.hpp"
#include "evmem/core/memory.hpp"
#include "evmem/harness/stats.hpp"
#include "evmem/search/search.hpp"

namespace evmem {

/// JSON-over-HTTP front end for one memory. Queries share the memory; ingest
/// takes it exclusively.
class MemoryService {
 public:
  MemoryService(Memory memory, ChatProvider& llm, const Embedder& embedder,
                std::optional<std::filesystem::path> persist_to = std::nullopt)
      : memory_(std::move(memory)), llm_(llm), embedder_(embedder), persist_to_(std::move(persist_to)) {}

  void install(httplib::Server& server) {
    server.Post("/v1/ingest", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return ingest(req.body); });
    });
    server.Post("/v1/query", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return query(req.body); });
    });
    server.Get("/v1/graph", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        std::shared_lock lock(memory_mu_);
        return snapshot_json(memory_);
      });
    });
    server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        std::lock_guard lock(log_mu_);
        return nlohmann::json(aggregate_stats(log_));
      });
    });
  }

  nlohmann::json ingest(const std::string& body) {
    auto parsed = read_utterances_jsonl_text(body);
    if (parsed.sessions.size() != 1) {
      throw Error(ErrorCode::validation, "ingest expects exactly one session per request, got " +
                                             std::to_string(parsed.sessions.size()));
    }
    std::unique_lock lock(memory_mu_);
    const auto report = construction_step(memory_, parsed.sessions.front(), llm_, embedder_);
    if (persist_to_) save_snapshot_file(memory_, *persist_to_);
    auto warnings = report.warnings;
    warnings.insert(warnings.end(), report.integration.warnings.begin(), report.integration.warnings.end());
    warnings.insert(warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
    return {{"session_id", report.session_id},
            {"step", report.step},
            {"extracted_events", report.extracted_events},
            {"inserted", report.integration.inserted},
            {"merged", report.integration.merged.size()},
            {"relations_added", report.integration.relations_added},
            {"events", memory_.store.event_count()},
            {"warnings", warnings}};
  }

  nlohmann::json query(const std::string& body) {
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("question") || !doc["question"].is_string())
      throw Error(ErrorCode::validation, "request body must be {\"question\": string}");
    const auto question = doc["question"].get<std::string>();
    std::shared_lock lock(memory_mu_);
    auto result = run_search(question, memory_.store, memory_.topics, memory_.config, llm_, embedder_);
    auto out = search_result_json(result, memory_.store);
    lock.unlock();
    std::lock_guard log_lock(log_mu_);
    log_.push_back(result.stats);
    return out;
  }

 private:
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      res.set_content(f().dump(), "application/json");
    } catch (const Error& e) {
      const bool client =
          e.code() == ErrorCode::validation || e.code() == ErrorCode::parse || e.code() == ErrorCode::precondition;
      res.status = client ? 400 : 500;
      res.set_content(nlohmann::json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                      "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump(), "application/json");
    }
  }

  Memory memory_;
  ChatProvider& llm_;
  const Embedder& embedder_;
  std::optional<std::filesystem::path> persist_to_;
  std::shared_mutex memory_mu_;
  std::mutex log_mu_;
  std::vector<SearchStats> log_;
};

}  // namespace evmem
