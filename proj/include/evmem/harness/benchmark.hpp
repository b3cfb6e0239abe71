#pragma once

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "evmem/core/json_fields.hpp"
#include "evmem/core/memory.hpp"
#include "evmem/harness/metrics.hpp"
#include "evmem/harness/stats.hpp"
#include "evmem/search/search.hpp"

namespace evmem {

struct QARecord {
  std::string question;
  std::string gold_answer;
  std::string category = "unknown";
  std::string source_item;
};

inline std::string normalize_category(std::string_view raw) {
  auto c = detail::lower(detail::trim(raw));
  std::replace(c.begin(), c.end(), '-', '_');
  std::replace(c.begin(), c.end(), ' ', '_');
  for (const char* known : {"single_hop", "multi_hop", "open_domain", "temporal"})
    if (c == known) return c;
  return "unknown";
}

struct QAReadResult {
  std::vector<QARecord> records;
  std::size_t skipped_lines = 0;
  std::vector<std::string> warnings;
};

/// Reads question records, one JSON object per line. Lines that are not JSON
/// or lack a question or gold answer are skipped with a warning.
inline QAReadResult read_qa_jsonl(std::istream& in) {
  QAReadResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto skip = [&](const std::string& why) {
      ++out.skipped_lines;
      out.warnings.push_back("line " + std::to_string(lineno) + ": " + why);
      spdlog::warn("dataset line {}: {}", lineno, why);
    };
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      skip("not a JSON object");
      continue;
    }
    auto text = [&](std::initializer_list<const char*> keys) -> std::string {
      for (const char* k : keys) {
        if (!j.contains(k)) continue;
        if (j[k].is_string()) return j[k].get<std::string>();
        if (j[k].is_number()) return j[k].dump();
      }
      return {};
    };
    QARecord r;
    r.question = text({"question"});
    r.gold_answer = text({"gold_answer", "answer"});
    if (detail::trim(r.question).empty() || detail::trim(r.gold_answer).empty()) {
      skip("missing question or gold answer");
      continue;
    }
    r.category = normalize_category(text({"category"}));
    r.source_item = text({"source_item", "item"});
    out.records.push_back(std::move(r));
  }
  return out;
}

inline QAReadResult read_qa_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::validation, "cannot open dataset " + path);
  return read_qa_jsonl(in);
}

struct QuestionResult {
  QARecord record;
  std::string prediction;
  double f1 = 0.0;
  double bleu1 = 0.0;
  std::string error;
  SearchStats stats;
};

struct ScoreSummary {
  int questions = 0;
  double f1 = 0.0;     // percent
  double bleu1 = 0.0;  // percent
};

EVMEM_JSON_FIELDS(ScoreSummary, questions, f1, bleu1)

struct BenchmarkReport {
  std::vector<QuestionResult> results;
  std::map<std::string, ScoreSummary> per_category;
  ScoreSummary overall;
  AggregateStats aggregate;
  std::size_t skipped_lines = 0;
  int failures = 0;
};

/// Answers every question against a read-only memory and scores the answers.
/// A failing question scores zero and carries its error.
inline BenchmarkReport run_benchmark(const std::vector<QARecord>& records, const Memory& memory, ChatProvider& llm,
                                     const Embedder& embedder, int workers = 1) {
  BenchmarkReport report;
  report.results.resize(records.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      auto& out = report.results[i];
      out.record = records[i];
      try {
        auto r = run_search(records[i].question, memory.store, memory.topics, memory.config, llm, embedder);
        out.prediction = r.answer;
        out.stats = std::move(r.stats);
        out.f1 = token_f1(out.prediction, records[i].gold_answer);
        out.bleu1 = bleu1(out.prediction, records[i].gold_answer);
      } catch (const std::exception& e) {
        out.error = e.what();
        out.stats.question = records[i].question;
        out.stats.error = e.what();
        spdlog::warn("question {} failed: {}", i + 1, e.what());
      }
      out.stats.item = records[i].source_item;
      out.stats.category = records[i].category;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<SearchStats> stats;
  for (const auto& r : report.results) {
    auto& cat = report.per_category[r.record.category];
    ++cat.questions;
    cat.f1 += r.f1;
    cat.bleu1 += r.bleu1;
    report.overall.f1 += r.f1;
    report.overall.bleu1 += r.bleu1;
    if (!r.error.empty()) ++report.failures;
    stats.push_back(r.stats);
  }
  for (auto& [k, s] : report.per_category) {
    s.f1 = 100.0 * s.f1 / s.questions;
    s.bleu1 = 100.0 * s.bleu1 / s.questions;
  }
  report.overall.questions = static_cast<int>(report.results.size());
  if (report.overall.questions > 0) {
    report.overall.f1 = 100.0 * report.overall.f1 / report.overall.questions;
    report.overall.bleu1 = 100.0 * report.overall.bleu1 / report.overall.questions;
  }
  report.aggregate = aggregate_stats(stats);
  return report;
}

inline nlohmann::json benchmark_report_json(const BenchmarkReport& r) {
  nlohmann::json questions = nlohmann::json::array();
  for (const auto& q : r.results) {
    questions.push_back({{"question", q.record.question},
                         {"gold_answer", q.record.gold_answer},
                         {"category", q.record.category},
                         {"source_item", q.record.source_item},
                         {"prediction", q.prediction},
                         {"f1", q.f1},
                         {"bleu1", q.bleu1},
                         {"error", q.error},
                         {"stats", q.stats}});
  }
  return {{"overall", r.overall},
          {"per_category", r.per_category},
          {"aggregate", r.aggregate},
          {"skipped_lines", r.skipped_lines},
          {"failures", r.failures},
          {"questions", std::move(questions)}};
}

inline std::string format_score_table(const BenchmarkReport& r) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-14s %6s %8s %8s\n", "Category", "#Q", "F1", "BLEU-1");
  out += buf;
  for (const auto& [k, s] : r.per_category) {
    std::snprintf(buf, sizeof buf, "%-14s %6d %8.1f %8.1f\n", k.c_str(), s.questions, round_to(s.f1, 1),
                  round_to(s.bleu1, 1));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-14s %6d %8.1f %8.1f\n", "overall", r.overall.questions, round_to(r.overall.f1, 1),
                round_to(r.overall.bleu1, 1));
  out += buf;
  if (r.skipped_lines > 0) out += "skipped dataset lines: " + std::to_string(r.skipped_lines) + "\n";
  if (r.failures > 0) out += "failed questions: " + std::to_string(r.failures) + "\n";
  return out;
}

/// One SearchStats JSON object per line, as read by `mem stats`.
inline std::vector<SearchStats> read_search_log(std::istream& in, std::size_t* skipped = nullptr) {
  std::vector<SearchStats> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      if (skipped) ++*skipped;
      continue;
    }
    try {
      out.push_back(j.get<SearchStats>());
    } catch (const nlohmann::json::exception&) {
      if (skipped) ++*skipped;
    }
  }
  return out;
}

}  // namespace evmem
