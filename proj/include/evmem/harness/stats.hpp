#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evmem/core/json_fields.hpp"
#include "evmem/search/search.hpp"

namespace evmem {

inline double round_to(double x, int decimals) {
  const double f = std::pow(10.0, decimals);
  return std::round(x * f) / f;
}

inline double percent1(double part, double whole) { return whole > 0 ? round_to(100.0 * part / whole, 1) : 0.0; }

struct GroupStats {
  int questions = 0;
  double avg_time_s = 0.0;
  double avg_steps = 0.0;
  double satisfaction_pct = 0.0;
  double refine_pct = 0.0;
  double avg_kept = 0.0;
};

EVMEM_JSON_FIELDS(GroupStats, questions, avg_time_s, avg_steps, satisfaction_pct, refine_pct, avg_kept)

/// Search statistics over a set of queries. Percentages are rounded to one
/// decimal; averages are kept unrounded.
struct AggregateStats {
  int questions = 0;

  double total_time_s = 0.0;
  double avg_time_s = 0.0;
  double median_time_s = 0.0;
  double max_time_s = 0.0;
  double min_time_s = 0.0;

  double avg_subgoals = 0.0;
  double avg_satisfaction_pct = 0.0;
  int fully_satisfied = 0;
  double fully_satisfied_pct = 0.0;

  double avg_retrieved_nodes = 0.0;
  double avg_initial_nodes = 0.0;
  double avg_similarity = 0.0;

  double avg_paths = 0.0;
  double avg_total_steps = 0.0;
  double avg_path_length = 0.0;
  int max_path_length = 0;
  double avg_rounds = 0.0;

  long long total_actions = 0;
  long long expand = 0;
  long long skip = 0;
  long long answer = 0;
  double expand_pct = 0.0;
  double skip_pct = 0.0;
  double answer_pct = 0.0;

  double avg_initial_queue_size = 0.0;
  double avg_max_queue_size = 0.0;

  int refinement_count = 0;
  double refinement_rate_pct = 0.0;

  double avg_kept_nodes = 0.0;
  int max_kept_nodes = 0;
  int no_kept_nodes = 0;
  int fallback_count = 0;

  std::map<int, int> path_length_histogram;
  std::map<std::string, GroupStats> per_item;
  std::map<std::string, GroupStats> per_category;
};

inline void to_json(nlohmann::json& j, const AggregateStats& a) {
  nlohmann::json hist = nlohmann::json::array();
  long long paths = 0;
  for (const auto& [len, n] : a.path_length_histogram) paths += n;
  for (const auto& [len, n] : a.path_length_histogram)
    hist.push_back({{"length", len}, {"count", n}, {"pct", percent1(n, static_cast<double>(paths))}});
  j = {{"questions", a.questions},
       {"time", {{"total_s", a.total_time_s}, {"avg_s", a.avg_time_s}, {"median_s", a.median_time_s},
                 {"max_s", a.max_time_s}, {"min_s", a.min_time_s}}},
       {"subgoals", {{"avg", a.avg_subgoals}, {"avg_satisfaction_pct", a.avg_satisfaction_pct},
                     {"fully_satisfied", a.fully_satisfied}, {"fully_satisfied_pct", a.fully_satisfied_pct}}},
       {"retrieval", {{"avg_retrieved_nodes", a.avg_retrieved_nodes}, {"avg_initial_nodes", a.avg_initial_nodes},
                      {"avg_similarity", a.avg_similarity}}},
       {"traversal", {{"avg_paths", a.avg_paths}, {"avg_total_steps", a.avg_total_steps},
                      {"avg_path_length", a.avg_path_length}, {"max_path_length", a.max_path_length},
                      {"avg_rounds", a.avg_rounds}}},
       {"actions", {{"total", a.total_actions}, {"expand", a.expand}, {"skip", a.skip}, {"answer", a.answer},
                    {"expand_pct", a.expand_pct}, {"skip_pct", a.skip_pct}, {"answer_pct", a.answer_pct}}},
       {"queue", {{"avg_initial_size", a.avg_initial_queue_size}, {"avg_max_size", a.avg_max_queue_size}}},
       {"refinement", {{"count", a.refinement_count}, {"rate_pct", a.refinement_rate_pct}}},
       {"kept_nodes", {{"avg", a.avg_kept_nodes}, {"max", a.max_kept_nodes}, {"none", a.no_kept_nodes},
                       {"fallbacks", a.fallback_count}}},
       {"path_length_histogram", std::move(hist)},
       {"per_item", a.per_item},
       {"per_category", a.per_category}};
}

namespace detail {

inline GroupStats group_stats(const std::vector<const SearchStats*>& rs) {
  GroupStats g;
  g.questions = static_cast<int>(rs.size());
  if (rs.empty()) return g;
  double time = 0, steps = 0, sat = 0, kept = 0;
  int refined = 0;
  for (const auto* r : rs) {
    time += r->elapsed_s;
    steps += r->total_steps;
    sat += r->satisfaction_ratio;
    kept += r->kept_nodes;
    refined += r->refined ? 1 : 0;
  }
  const double n = static_cast<double>(rs.size());
  g.avg_time_s = time / n;
  g.avg_steps = steps / n;
  g.satisfaction_pct = round_to(100.0 * sat / n, 1);
  g.refine_pct = percent1(refined, n);
  g.avg_kept = kept / n;
  return g;
}

}  // namespace detail

inline AggregateStats aggregate_stats(const std::vector<SearchStats>& records) {
  AggregateStats a;
  a.questions = static_cast<int>(records.size());
  if (records.empty()) return a;
  const double n = static_cast<double>(records.size());

  std::vector<double> times;
  double subgoals = 0, sat = 0, retrieved = 0, initial = 0, sim = 0, paths = 0, steps = 0, rounds = 0, q0 = 0,
         qmax = 0, kept = 0;
  long long path_count = 0, path_total = 0;
  std::map<std::string, std::vector<const SearchStats*>> by_item, by_category;
  for (const auto& r : records) {
    times.push_back(r.elapsed_s);
    subgoals += r.subgoals;
    sat += r.satisfaction_ratio;
    if (r.subgoals > 0 && r.satisfied == r.subgoals) ++a.fully_satisfied;
    retrieved += r.retrieved_nodes;
    initial += r.initial_nodes;
    sim += r.avg_similarity;
    paths += r.paths;
    steps += r.total_steps;
    rounds += r.rounds;
    for (int len : r.path_lengths) {
      ++a.path_length_histogram[len];
      ++path_count;
      path_total += len;
      a.max_path_length = std::max(a.max_path_length, len);
    }
    a.expand += r.expand;
    a.skip += r.skip;
    a.answer += r.answer;
    q0 += r.initial_queue_size;
    qmax += r.max_queue_size;
    if (r.refined) ++a.refinement_count;
    kept += r.kept_nodes;
    a.max_kept_nodes = std::max(a.max_kept_nodes, r.kept_nodes);
    if (r.kept_nodes == 0) ++a.no_kept_nodes;
    if (r.fallback) ++a.fallback_count;
    by_item[r.item.empty() ? "unknown" : r.item].push_back(&r);
    by_category[r.category.empty() ? "unknown" : r.category].push_back(&r);
  }

  for (double t : times) a.total_time_s += t;
  a.avg_time_s = a.total_time_s / n;
  std::sort(times.begin(), times.end());
  const auto mid = times.size() / 2;
  a.median_time_s = times.size() % 2 ? times[mid] : (times[mid - 1] + times[mid]) / 2.0;
  a.min_time_s = times.front();
  a.max_time_s = times.back();

  a.avg_subgoals = subgoals / n;
  a.avg_satisfaction_pct = round_to(100.0 * sat / n, 1);
  a.fully_satisfied_pct = percent1(a.fully_satisfied, n);
  a.avg_retrieved_nodes = retrieved / n;
  a.avg_initial_nodes = initial / n;
  a.avg_similarity = sim / n;
  a.avg_paths = paths / n;
  a.avg_total_steps = steps / n;
  a.avg_path_length = path_count ? static_cast<double>(path_total) / static_cast<double>(path_count) : 0.0;
  a.avg_rounds = rounds / n;

  a.total_actions = a.expand + a.skip + a.answer;
  const double total = static_cast<double>(a.total_actions);
  a.expand_pct = percent1(static_cast<double>(a.expand), total);
  a.skip_pct = percent1(static_cast<double>(a.skip), total);
  a.answer_pct = percent1(static_cast<double>(a.answer), total);

  a.avg_initial_queue_size = q0 / n;
  a.avg_max_queue_size = qmax / n;
  a.refinement_rate_pct = percent1(a.refinement_count, n);
  a.avg_kept_nodes = kept / n;

  for (const auto& [k, rs] : by_item) a.per_item[k] = detail::group_stats(rs);
  for (const auto& [k, rs] : by_category) a.per_category[k] = detail::group_stats(rs);
  return a;
}

/// Aligned two-column text rendering of the aggregate table.
inline std::string format_stats_table(const AggregateStats& a) {
  std::string out;
  char buf[160];
  auto row = [&](const char* label, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-28s %14s\n", label, value.c_str());
    out += buf;
  };
  auto num = [&](const char* fmt, double v) {
    std::snprintf(buf, sizeof buf, fmt, v);
    return std::string(buf);
  };
  auto count_pct = [&](long long c, double pct) {
    std::snprintf(buf, sizeof buf, "%lld (%.1f%%)", c, pct);
    return std::string(buf);
  };
  auto section = [&](const char* name) { out += std::string(name) + "\n"; };

  row("Total Questions", std::to_string(a.questions));
  section("Time");
  row("  Total Time", num("%.1f s", a.total_time_s));
  row("  Avg. Time per Question", num("%.2f s", a.avg_time_s));
  row("  Median Time", num("%.2f s", a.median_time_s));
  row("  Max Time", num("%.2f s", a.max_time_s));
  row("  Min Time", num("%.2f s", a.min_time_s));
  section("Subgoals");
  row("  Avg. Subgoals", num("%.2f", a.avg_subgoals));
  row("  Avg. Subgoal Satisfaction", num("%.1f%%", a.avg_satisfaction_pct));
  row("  Fully Satisfied", count_pct(a.fully_satisfied, a.fully_satisfied_pct));
  section("Retrieval");
  row("  Avg. Retrieved Nodes", num("%.1f", a.avg_retrieved_nodes));
  row("  Avg. Initial Nodes", num("%.1f", a.avg_initial_nodes));
  row("  Avg. Similarity", num("%.4f", a.avg_similarity));
  section("Traversal");
  row("  Avg. Paths", num("%.1f", a.avg_paths));
  row("  Avg. Total Steps", num("%.1f", a.avg_total_steps));
  row("  Avg. Path Length", num("%.2f", a.avg_path_length));
  row("  Max Path Length", std::to_string(a.max_path_length));
  row("  Avg. Rounds", num("%.1f", a.avg_rounds));
  section("Actions");
  row("  Total Actions", std::to_string(a.total_actions));
  row("  EXPAND", count_pct(a.expand, a.expand_pct));
  row("  SKIP", count_pct(a.skip, a.skip_pct));
  row("  ANSWER", count_pct(a.answer, a.answer_pct));
  section("Queue");
  row("  Avg. Initial Queue Size", num("%.1f", a.avg_initial_queue_size));
  row("  Avg. Max Queue Size", num("%.1f", a.avg_max_queue_size));
  section("Refinement");
  row("  Refinement Count", std::to_string(a.refinement_count));
  row("  Refinement Rate", num("%.1f%%", a.refinement_rate_pct));
  section("Kept Nodes");
  row("  Avg. Kept Nodes", num("%.2f", a.avg_kept_nodes));
  row("  Max Kept Nodes", std::to_string(a.max_kept_nodes));
  row("  No Kept Nodes", std::to_string(a.no_kept_nodes));

  if (!a.path_length_histogram.empty()) {
    long long paths = 0;
    for (const auto& [len, c] : a.path_length_histogram) paths += c;
    out += "\nPath Length      Count  Percentage\n";
    for (const auto& [len, c] : a.path_length_histogram) {
      std::snprintf(buf, sizeof buf, "%11d %10d %10.1f%%\n", len, c, percent1(c, static_cast<double>(paths)));
      out += buf;
    }
  }
  auto groups = [&](const char* title, const std::map<std::string, GroupStats>& m) {
    if (m.empty()) return;
    std::snprintf(buf, sizeof buf, "\n%-18s %5s %10s %9s %8s %8s %8s\n", title, "#Q", "Avg.Time", "Avg.Steps", "Sat.%",
                  "Refine%", "Avg.Kept");
    out += buf;
    for (const auto& [k, g] : m) {
      std::snprintf(buf, sizeof buf, "%-18s %5d %10.2f %9.1f %8.1f %8.1f %8.1f\n", k.c_str(), g.questions,
                    g.avg_time_s, g.avg_steps, g.satisfaction_pct, g.refine_pct, g.avg_kept);
      out += buf;
    }
  };
  groups("Item", a.per_item);
  groups("Category", a.per_category);
  return out;
}

}  // namespace evmem
