#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli_support.hpp"
#include "evmem/evmem.hpp"
#include "evmem/service/http_service.hpp"

using namespace evmem;

namespace {

int cmd_ingest(const std::string& input, const std::string& store_path, const std::string& config_path) {
  Memory memory = cli::open_or_create(store_path, config_path);
  auto llm = cli::provider_from_env();
  auto embedder = cli::embedder_for(memory.config);
  const auto parsed = read_utterances_jsonl_file(input);
  std::size_t inserted = 0, merged = 0, failed = 0;
  for (const auto& session : parsed.sessions) {
    try {
      const auto report = construction_step(memory, session, *llm, *embedder);
      inserted += report.integration.inserted.size();
      merged += report.integration.merged.size();
      for (const auto& w : report.warnings) spdlog::warn("{}: {}", session.id, w);
      for (const auto& w : report.integration.warnings) spdlog::warn("{}: {}", session.id, w);
    } catch (const Error& e) {
      ++failed;
      spdlog::error("session {} not ingested: {}", session.id, e.what());
    }
    save_snapshot_file(memory, store_path);
  }
  std::printf("sessions: %zu (failed %zu), events inserted: %zu, merged: %zu, store now %zu events / %zu relations\n",
              parsed.sessions.size(), failed, inserted, merged, memory.store.event_count(),
              memory.store.relation_count());
  if (parsed.skipped_lines) std::printf("skipped input lines: %zu\n", parsed.skipped_lines);
  return failed ? 1 : 0;
}

int cmd_query(const std::string& store_path, const std::string& question, bool trace) {
  const Memory memory = load_snapshot_file(store_path);
  auto llm = cli::provider_from_env();
  auto embedder = cli::embedder_for(memory.config);
  const auto result = run_search(question, memory.store, memory.topics, memory.config, *llm, *embedder);
  if (trace) {
    std::cout << search_result_json(result, memory.store).dump(2) << "\n";
  } else {
    std::cout << result.answer << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& store_path, const std::string& dataset, const std::string& out_path,
              const std::string& log_path, int workers) {
  const Memory memory = load_snapshot_file(store_path);
  const auto before = snapshot(memory);
  auto llm = cli::provider_from_env();
  auto embedder = cli::embedder_for(memory.config);
  const auto data = read_qa_jsonl_file(dataset);
  auto report = run_benchmark(data.records, memory, *llm, *embedder, workers > 0 ? workers : memory.config.bench_workers);
  report.skipped_lines = data.skipped_lines;
  if (snapshot(memory) != before) throw Error(ErrorCode::precondition, "benchmark modified the store");

  std::ofstream(out_path) << benchmark_report_json(report).dump(2) << "\n";
  if (!log_path.empty()) {
    std::ofstream log(log_path);
    for (const auto& r : report.results) log << nlohmann::json(r.stats).dump() << "\n";
  }
  std::cout << format_score_table(report) << "\n" << format_stats_table(report.aggregate);
  return 0;
}

int cmd_stats(const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) throw Error(ErrorCode::validation, "cannot open " + in_path);
  std::size_t skipped = 0;
  const auto records = read_search_log(in, &skipped);
  if (skipped) spdlog::warn("{} unreadable log lines skipped", skipped);
  std::cout << format_stats_table(aggregate_stats(records));
  return 0;
}

int cmd_serve(const std::string& store_path, const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::validation, "--addr must be host:port");
  const std::string host = addr.substr(0, colon);
  const int port = std::stoi(addr.substr(colon + 1));
  Memory memory = cli::open_or_create(store_path, "");
  auto llm = cli::provider_from_env();
  auto embedder = cli::embedder_for(memory.config);
  MemoryService service(std::move(memory), *llm, *embedder, std::filesystem::path(store_path));
  httplib::Server server;
  service.install(server);
  spdlog::info("listening on {}:{}", host, port);
  if (!server.listen(host, port)) throw Error(ErrorCode::transport, "cannot listen on " + addr);
  return 0;
}

int cmd_export(const std::string& store_path, const std::string& format) {
  if (format != "json") throw Error(ErrorCode::validation, "unsupported export format '" + format + "'");
  std::cout << snapshot(load_snapshot_file(store_path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mem"));
  if (auto level = env_var("MEM_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(*level));

  CLI::App app{"Event-graph memory for conversational agents"};
  app.require_subcommand(1);

  std::string input, store, config, question, dataset, out, log, in, addr = "127.0.0.1:8080", format = "json";
  bool trace = false;
  int workers = 0;

  auto* ingest = app.add_subcommand("ingest", "Build or extend a store from utterance JSONL");
  ingest->add_option("--input", input, "Utterance JSONL")->required();
  ingest->add_option("--store", store, "Store snapshot path")->required();
  ingest->add_option("--config", config, "Config JSON for a new store");

  auto* query = app.add_subcommand("query", "Answer one question from a store");
  query->add_option("--store", store)->required();
  query->add_option("--question", question)->required();
  query->add_flag("--trace", trace, "Print plan, evidence and statistics as JSON");

  auto* bench = app.add_subcommand("bench", "Score a question dataset against a store");
  bench->add_option("--store", store)->required();
  bench->add_option("--dataset", dataset)->required();
  bench->add_option("--out", out, "JSON report path")->required();
  bench->add_option("--log", log, "Per-question statistics JSONL");
  bench->add_option("--workers", workers, "Concurrent questions");

  auto* stats = app.add_subcommand("stats", "Aggregate a search log");
  stats->add_option("--in", in)->required();

  auto* serve = app.add_subcommand("serve", "Serve a store over HTTP");
  serve->add_option("--store", store)->required();
  serve->add_option("--addr", addr, "host:port");

  auto* exp = app.add_subcommand("export-graph", "Print the store snapshot");
  exp->add_option("--store", store)->required();
  exp->add_option("--format", format);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ingest) return cmd_ingest(input, store, config);
    if (*query) return cmd_query(store, question, trace);
    if (*bench) return cmd_bench(store, dataset, out, log, workers);
    if (*stats) return cmd_stats(in);
    if (*serve) return cmd_serve(store, addr);
    if (*exp) return cmd_export(store, format);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
