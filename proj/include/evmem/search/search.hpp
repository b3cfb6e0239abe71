#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "evmem/config.hpp"
#include "evmem/core/embedding.hpp"
#include "evmem/core/event_store.hpp"
#include "evmem/core/json_fields.hpp"
#include "evmem/llm/call.hpp"
#include "evmem/llm/parsers.hpp"
#include "evmem/search/frontier.hpp"
#include "evmem/topics/topic_layer.hpp"

namespace evmem {

struct SubgoalPlan {
  std::string query;
  std::string original_query;
  std::vector<std::string> subgoals;
  std::vector<int> satisfaction;  // one 0/1 bit per subgoal, only ever set
  std::vector<Vector> subgoal_embeddings;

  bool all_satisfied() const {
    return std::all_of(satisfaction.begin(), satisfaction.end(), [](int b) { return b != 0; });
  }
  std::size_t satisfied_count() const {
    return static_cast<std::size_t>(std::count(satisfaction.begin(), satisfaction.end(), 1));
  }
};

struct EvidenceItem {
  std::string id;
  std::vector<int> subgoals;  // 1-based indices the decision credited to this node
  ActionKind action = ActionKind::expand;
};

/// Per-query counters.
struct SearchStats {
  std::string question;
  std::string item;
  std::string category;
  double elapsed_s = 0.0;
  int subgoals = 0;
  int satisfied = 0;
  double satisfaction_ratio = 0.0;
  int retrieved_nodes = 0;  // candidate-set sizes summed over localizations
  int initial_nodes = 0;    // start nodes of the first round
  double avg_similarity = 0.0;
  int paths = 0;
  int total_steps = 0;
  std::vector<int> path_lengths;
  int rounds = 0;
  int expand = 0;
  int skip = 0;
  int answer = 0;
  int initial_queue_size = 0;
  int max_queue_size = 0;
  bool refined = false;
  int kept_nodes = 0;
  bool fallback = false;
  std::string error;
};

EVMEM_JSON_FIELDS(SearchStats, question, item, category, elapsed_s, subgoals, satisfied, satisfaction_ratio, retrieved_nodes, initial_nodes, avg_similarity, paths, total_steps, path_lengths, rounds, expand, skip, answer, initial_queue_size, max_queue_size, refined, kept_nodes, fallback, error)

struct SearchState {
  std::set<std::string> visited;
  std::vector<std::string> visit_order;
  std::vector<EvidenceItem> evidence;
  FrontierQueue queue;
  int round = 0;
  std::vector<std::string> initial_candidates;
  SearchStats stats;

  bool in_evidence(const std::string& id) const {
    return std::any_of(evidence.begin(), evidence.end(), [&](const EvidenceItem& e) { return e.id == id; });
  }
};

struct LocalizeResult {
  std::vector<std::pair<std::string, double>> ranked;  // by similarity, descending
  std::vector<std::string> direct;                     // top-k
  std::vector<std::string> candidates;                 // direct plus per-topic picks, deduplicated
  std::vector<std::string> selected;                   // start nodes
  bool selection_fallback = false;
};

struct SearchResult {
  std::string answer;
  std::vector<EvidenceItem> evidence;
  SubgoalPlan plan;
  SearchStats stats;
  std::vector<std::string> visit_order;
  std::vector<std::string> start_nodes;
  std::optional<std::string> refined_query;
};

namespace detail {

inline std::string subgoals_text(const SubgoalPlan& plan) {
  std::string out = "SUB-GOALS:";
  for (std::size_t i = 0; i < plan.subgoals.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". [" + (plan.satisfaction[i] ? "SATISFIED" : "NOT SATISFIED") + "] " +
           plan.subgoals[i];
  }
  return out;
}

inline std::string event_line(const Event& e) {
  std::string out = "[" + e.id + "] " + e.summary;
  if (!e.time_info.empty()) out += " (time: " + e.time_info + ")";
  if (!e.participants.empty()) out += " (people: " + join(e.participants, ", ") + ")";
  return out;
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Sortable form of an utterance timestamp. ISO dates sort as-is; the
/// "1:56 pm on 8 May, 2023" style is rewritten to ISO; anything else is kept.
inline std::string timestamp_sort_key(const std::string& ts) {
  static const std::regex spoken(R"((\d{1,2}):(\d{2})\s*([ap]m)\s+on\s+(\d{1,2})\s+([A-Za-z]+),?\s+(\d{4}))",
                                 std::regex::icase);
  std::smatch m;
  if (!std::regex_search(ts, m, spoken)) return ts;
  static const char* months[] = {"jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
  const auto mon = lower(m[5].str()).substr(0, 3);
  int month = 0;
  for (int i = 0; i < 12; ++i)
    if (mon == months[i]) month = i + 1;
  if (month == 0) return ts;
  int hour = std::stoi(m[1].str()) % 12;
  if (lower(m[3].str()) == "pm") hour += 12;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%s", std::stoi(m[6].str()), month, std::stoi(m[4].str()), hour,
                m[2].str().c_str());
  return buf;
}

inline std::string strip_answer_label(std::string_view text) {
  auto t = trim(text);
  for (;;) {
    if (t.size() >= 7 && lower(t.substr(0, 7)) == "answer:") {
      t = trim(t.substr(7));
    } else {
      break;
    }
  }
  return std::string(t);
}

}  // namespace detail

/// Decomposes the query into 2-5 subgoals and embeds each.
inline SubgoalPlan plan_subgoals(const std::string& query, ChatProvider& llm, const Embedder& embedder,
                                 const Config& config) {
  if (detail::trim(query).empty()) throw Error(ErrorCode::validation, "query is empty");
  const auto request = make_request(tmpl::kPlanning, {{"question", query}}, {{"question", query}}, config);
  SubgoalPlan plan;
  try {
    plan.subgoals = chat_and_parse(llm, request, config.llm_retries, [&](std::string_view text) {
      return parse_subgoals(text, static_cast<std::size_t>(config.subgoal_min),
                            static_cast<std::size_t>(config.subgoal_max));
    });
  } catch (const Error& e) {
    throw Error(ErrorCode::planning, std::string("planning failed: ") + e.what());
  }
  plan.query = query;
  plan.original_query = query;
  plan.satisfaction.assign(plan.subgoals.size(), 0);
  plan.subgoal_embeddings = embedder.embed_batch(plan.subgoals);
  return plan;
}

/// Priority of a node: its best similarity to any subgoal not yet satisfied.
inline double priority(std::span<const double> node_embedding, const SubgoalPlan& plan) {
  double best = -2.0;
  bool any = false;
  for (std::size_t j = 0; j < plan.subgoals.size(); ++j) {
    if (plan.satisfaction[j]) continue;
    best = std::max(best, cosine_similarity(node_embedding, plan.subgoal_embeddings[j]));
    any = true;
  }
  if (!any) throw Error(ErrorCode::precondition, "priority is undefined once every subgoal is satisfied");
  return best;
}

/// Picks start nodes: top-k by similarity plus the best event of each of the
/// first p topics met in rank order, narrowed by the selection prompt. Ids in
/// `exclude` are left out of the ranking.
inline LocalizeResult localize(const SubgoalPlan& plan, const EventStore& store, const TopicState& topics, int k, int p,
                               ChatProvider& llm, const Embedder& embedder, const Config& config,
                               const std::set<std::string>* exclude = nullptr) {
  if (store.empty()) throw Error(ErrorCode::precondition, "cannot search an empty store");
  if (k < 1 || p < 0) throw Error(ErrorCode::validation, "localize needs k >= 1 and p >= 0");
  LocalizeResult out;
  const auto q = embedder.embed(plan.query);
  for (const auto& [id, e] : store.events()) {
    if (exclude != nullptr && exclude->contains(id)) continue;
    out.ranked.emplace_back(id, cosine_similarity(q, e.embedding));
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.ranked.empty()) return out;

  for (std::size_t i = 0; i < out.ranked.size() && i < static_cast<std::size_t>(k); ++i)
    out.direct.push_back(out.ranked[i].first);
  out.candidates = out.direct;
  std::set<std::size_t> topics_seen;
  for (const auto& [id, sim] : out.ranked) {
    if (topics_seen.size() >= static_cast<std::size_t>(p)) break;
    const auto t = topics.topic_of(id);
    if (!t || !topics_seen.insert(*t).second) continue;
    if (std::find(out.candidates.begin(), out.candidates.end(), id) == out.candidates.end())
      out.candidates.push_back(id);
  }

  std::map<std::string, double> sim_of(out.ranked.begin(), out.ranked.end());
  std::string nodes_text;
  for (const auto& id : out.candidates)
    nodes_text += detail::event_line(store.event(id)) + " (similarity: " + detail::fixed4(sim_of[id]) + ")\n";
  if (!nodes_text.empty()) nodes_text.pop_back();
  const std::set<std::string> valid(out.candidates.begin(), out.candidates.end());
  const auto request = make_request(
      tmpl::kNodeSelection,
      {{"question", plan.query}, {"subgoals_text", detail::subgoals_text(plan)}, {"nodes_text", nodes_text}},
      {{"question", plan.query}}, config);
  try {
    out.selected = chat_and_parse(llm, request, config.llm_retries,
                                  [&](std::string_view text) { return parse_node_selection(text, valid, 5); });
  } catch (const Error& e) {
    spdlog::warn("start-node selection failed ({}); using the top-ranked candidates", e.what());
  }
  if (out.selected.empty()) {
    out.selection_fallback = true;
    for (std::size_t i = 0; i < out.ranked.size() && i < 3; ++i) out.selected.push_back(out.ranked[i].first);
  }
  return out;
}

/// Asks the model what to do at `node_id`. Failures become a SKIP with no next
/// nodes. Does not touch any search state.
inline Action decide_action(const std::string& node_id, const SubgoalPlan& plan,
                            const std::vector<EvidenceItem>& kept, const EventStore& store, ChatProvider& llm,
                            const Config& config) {
  const Event& node = store.event(node_id);
  std::string kept_text;
  for (const auto& item : kept) kept_text += "- " + detail::event_line(store.event(item.id)) + "\n";
  if (!kept_text.empty()) kept_text.pop_back();

  std::string current = "ID: " + node.id + "\nSummary: " + node.summary;
  current += "\nTime: " + (node.time_info.empty() ? std::string("unknown") : node.time_info);
  if (!node.observed_at.empty()) current += "\nRecorded: " + node.observed_at;
  if (!node.participants.empty()) current += "\nParticipants: " + detail::join(node.participants, ", ");

  std::string neighbor_text;
  std::set<std::string> valid;
  for (const auto& n : store.neighbors(node_id)) {
    valid.insert(n.event.id);
    neighbor_text += "- [" + n.event.id + "] " + (n.direction == Direction::out ? "--" : "<-") + n.label +
                     (n.direction == Direction::out ? "-> " : "-- ") + n.event.summary + "\n";
  }
  if (!neighbor_text.empty()) neighbor_text.pop_back();

  const auto request = make_request(tmpl::kActionDecision,
                                    {{"question", plan.query},
                                     {"subgoals_text", detail::subgoals_text(plan)},
                                     {"kept_nodes_info", kept_text},
                                     {"current_info", current},
                                     {"neighbor_info", neighbor_text}},
                                    {{"question", plan.original_query}, {"node", node_id}}, config);
  try {
    auto a = chat_and_parse(llm, request, config.llm_retries, [&](std::string_view text) {
      return parse_action_decision(text, valid, plan.subgoals.size());
    });
    for (const auto& w : a.warnings) spdlog::debug("node {}: {}", node_id, w);
    return a;
  } catch (const Error& e) {
    spdlog::warn("action decision at {} failed ({}); skipping the node", node_id, e.what());
    Action skip;
    skip.kind = ActionKind::skip;
    skip.warnings.push_back(e.what());
    return skip;
  }
}

inline void count_action(SearchStats& stats, ActionKind kind) {
  ++stats.total_steps;
  switch (kind) {
    case ActionKind::skip: ++stats.skip; break;
    case ActionKind::expand: ++stats.expand; break;
    case ActionKind::answer: ++stats.answer; break;
  }
}

/// Visits `node_id`: marks it visited, asks for an action and counts it.
inline Action step(const std::string& node_id, const SubgoalPlan& plan, SearchState& state, const EventStore& store,
                   ChatProvider& llm, const Config& config) {
  if (!store.contains(node_id)) throw Error(ErrorCode::unknown_id, "no event " + node_id);
  if (!state.visited.insert(node_id).second)
    throw Error(ErrorCode::precondition, "node " + node_id + " was already visited");
  state.visit_order.push_back(node_id);
  auto action = decide_action(node_id, plan, state.evidence, store, llm, config);
  count_action(state.stats, action.kind);
  return action;
}

/// Applies an action: keeps the node on EXPAND/ANSWER, ORs in the satisfied
/// subgoals, then enqueues unseen suggested neighbors unless every subgoal is
/// now satisfied. Returns true when the current path ends here.
inline bool apply_action(SearchState& state, SubgoalPlan& plan, const std::string& node_id, const Action& action,
                         const EventStore& store) {
  if (action.kind != ActionKind::skip) {
    if (!state.in_evidence(node_id)) state.evidence.push_back({node_id, action.satisfied_subgoals, action.kind});
    for (int j : action.satisfied_subgoals)
      if (j >= 1 && static_cast<std::size_t>(j) <= plan.satisfaction.size()) plan.satisfaction[j - 1] = 1;
  }
  if (!plan.all_satisfied()) {
    for (const auto& next : action.next_nodes) {
      if (state.visited.contains(next) || state.queue.was_enqueued(next) || !store.contains(next)) continue;
      state.queue.push(next, priority(store.event(next).embedding, plan));
      state.stats.max_queue_size = std::max(state.stats.max_queue_size, static_cast<int>(state.queue.size()));
    }
  }
  return action.kind == ActionKind::answer || action.next_nodes.empty();
}

/// Gap-aware refinement: a new query aimed at the unsatisfied subgoals.
/// Progress carries over. Returns nullopt when the reply is unusable.
inline std::optional<SubgoalPlan> refine(const SubgoalPlan& plan, const std::vector<EvidenceItem>& evidence,
                                         const EventStore& store, ChatProvider& llm, const Config& config) {
  if (plan.all_satisfied()) throw Error(ErrorCode::precondition, "nothing to refine: every subgoal is satisfied");
  std::string satisfied, unsatisfied, unsatisfied_key;
  for (std::size_t i = 0; i < plan.subgoals.size(); ++i) {
    const auto line = std::to_string(i + 1) + ". " + plan.subgoals[i] + "\n";
    (plan.satisfaction[i] ? satisfied : unsatisfied) += line;
    if (!plan.satisfaction[i]) unsatisfied_key += plan.subgoals[i] + "\n";
  }
  if (!satisfied.empty()) satisfied.pop_back();
  if (!unsatisfied.empty()) unsatisfied.pop_back();
  std::string context;
  for (const auto& item : evidence) context += "- " + detail::event_line(store.event(item.id)) + "\n";
  if (!context.empty()) context.pop_back();

  const auto request = make_request(tmpl::kQueryRefinement,
                                    {{"original_question", plan.original_query},
                                     {"satisfied_text", satisfied},
                                     {"unsatisfied_text", unsatisfied},
                                     {"context_so_far", context}},
                                    {{"original_question", plan.original_query}, {"unsatisfied", unsatisfied_key}},
                                    config);
  try {
    auto refined = chat_and_parse(llm, request, config.llm_retries, parse_refined_query);
    SubgoalPlan next = plan;
    next.query = refined.query;
    return next;
  } catch (const Error& e) {
    spdlog::warn("query refinement failed ({}); keeping partial evidence", e.what());
    return std::nullopt;
  }
}

/// Evidence formatted for the response prompt, oldest first.
inline std::string format_context(const std::vector<const Event*>& events) {
  std::vector<const Event*> sorted = events;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Event* a, const Event* b) {
    const auto ka = detail::timestamp_sort_key(a->observed_at);
    const auto kb = detail::timestamp_sort_key(b->observed_at);
    if (ka != kb) return ka < kb;
    return a->id < b->id;
  });
  std::string out;
  for (const Event* e : sorted) {
    out += "- ";
    if (!e->observed_at.empty()) out += "[" + e->observed_at + "] ";
    out += e->summary;
    if (!e->time_info.empty()) out += " (time reference: " + e->time_info + ")";
    out += "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

inline std::string respond(const std::string& question, const std::vector<const Event*>& evidence, ChatProvider& llm,
                           const Config& config) {
  if (evidence.empty()) throw Error(ErrorCode::precondition, "respond needs at least one evidence event");
  const auto request = make_request(tmpl::kResponseGeneration,
                                    {{"context", format_context(evidence)}, {"question", question}},
                                    {{"question", question}}, config);
  return chat_and_parse(llm, request, config.llm_retries,
                        [](std::string_view text) { return detail::strip_answer_label(text); });
}

namespace detail {

/// Drains the queue with `workers` explorers sharing `state` and `plan`.
inline void explore(SearchState& state, SubgoalPlan& plan, const EventStore& store, ChatProvider& llm,
                    const Config& config, int workers) {
  std::mutex mu;
  std::condition_variable cv;
  int active = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    bool in_path = false;
    int path_len = 0;
    auto end_path = [&] {
      if (in_path) state.stats.path_lengths.push_back(path_len);
      in_path = false;
      path_len = 0;
    };
    std::unique_lock lock(mu);
    for (;;) {
      std::optional<FrontierQueue::Entry> next;
      while (!failure) {
        while ((next = state.queue.pop()) && state.visited.contains(next->id)) {
        }
        if (next) break;
        end_path();
        if (active == 0) break;
        cv.wait(lock);
      }
      if (!next || failure) {
        end_path();
        cv.notify_all();
        return;
      }
      state.visited.insert(next->id);
      state.visit_order.push_back(next->id);
      if (!in_path) {
        in_path = true;
        ++state.stats.paths;
      }
      ++active;
      const SubgoalPlan plan_view = plan;
      const auto kept = state.evidence;
      lock.unlock();

      Action action;
      try {
        action = decide_action(next->id, plan_view, kept, store, llm, config);
      } catch (...) {
        lock.lock();
        failure = std::current_exception();
        --active;
        end_path();
        cv.notify_all();
        return;
      }

      lock.lock();
      --active;
      count_action(state.stats, action.kind);
      ++path_len;
      const bool path_done = apply_action(state, plan, next->id, action, store);
      if (path_done || path_len >= config.path_step_cap) end_path();
      cv.notify_all();
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

inline int seed_queue(SearchState& state, const SubgoalPlan& plan, const EventStore& store,
                      const std::vector<std::string>& ids) {
  int pushed = 0;
  for (const auto& id : ids) {
    if (state.visited.contains(id)) continue;
    if (state.queue.push(id, priority(store.event(id).embedding, plan))) ++pushed;
  }
  state.stats.max_queue_size = std::max(state.stats.max_queue_size, static_cast<int>(state.queue.size()));
  return pushed;
}

}  // namespace detail

/// Full memory search for one question: plan, localize, explore with parallel
/// explorers, refine once if subgoals remain open, then answer.
inline SearchResult run_search(const std::string& question, const EventStore& store, const TopicState& topics,
                               const Config& config, ChatProvider& llm, const Embedder& embedder) {
  const auto t0 = std::chrono::steady_clock::now();
  if (store.empty()) throw Error(ErrorCode::precondition, "cannot search an empty store");
  SearchResult result;
  SearchState state;
  state.stats.question = question;
  SubgoalPlan plan = plan_subgoals(question, llm, embedder, config);

  const auto loc = localize(plan, store, topics, config.top_k, config.top_p_topics, llm, embedder, config);
  state.initial_candidates = loc.direct;
  result.start_nodes = loc.selected;
  state.stats.retrieved_nodes += static_cast<int>(loc.candidates.size());
  state.stats.initial_nodes = static_cast<int>(loc.selected.size());
  {
    const auto q = embedder.embed(plan.query);
    double total = 0.0;
    for (const auto& id : loc.selected) total += cosine_similarity(q, store.event(id).embedding);
    state.stats.avg_similarity = loc.selected.empty() ? 0.0 : total / static_cast<double>(loc.selected.size());
  }
  detail::seed_queue(state, plan, store, loc.selected);
  state.stats.initial_queue_size = static_cast<int>(state.queue.size());

  for (;;) {
    detail::explore(state, plan, store, llm, config, config.num_explorers);
    if (plan.all_satisfied() || state.round >= config.max_refinement_rounds) break;
    auto refined = refine(plan, state.evidence, store, llm, config);
    if (!refined) break;
    plan = std::move(*refined);
    ++state.round;
    state.stats.refined = true;
    result.refined_query = plan.query;
    const auto again = localize(plan, store, topics, config.top_k, config.top_p_topics, llm, embedder, config,
                                &state.visited);
    state.stats.retrieved_nodes += static_cast<int>(again.candidates.size());
    if (detail::seed_queue(state, plan, store, again.selected) == 0) break;
  }

  state.stats.rounds = state.round + 1;
  state.stats.kept_nodes = static_cast<int>(state.evidence.size());
  std::vector<const Event*> context;
  if (state.evidence.empty()) {
    state.stats.fallback = true;
    for (const auto& id : state.initial_candidates) context.push_back(&store.event(id));
  } else {
    for (const auto& item : state.evidence) context.push_back(&store.event(item.id));
  }
  result.answer = respond(plan.original_query, context, llm, config);

  state.stats.subgoals = static_cast<int>(plan.subgoals.size());
  state.stats.satisfied = static_cast<int>(plan.satisfied_count());
  state.stats.satisfaction_ratio =
      plan.subgoals.empty() ? 0.0 : static_cast<double>(state.stats.satisfied) / static_cast<double>(plan.subgoals.size());
  state.stats.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.evidence = std::move(state.evidence);
  result.plan = std::move(plan);
  result.stats = std::move(state.stats);
  result.visit_order = std::move(state.visit_order);
  return result;
}

inline nlohmann::json search_result_json(const SearchResult& r, const EventStore& store) {
  nlohmann::json evidence = nlohmann::json::array();
  for (const auto& item : r.evidence) {
    evidence.push_back({{"id", item.id},
                        {"summary", store.event(item.id).summary},
                        {"subgoals", item.subgoals},
                        {"action", std::string(to_string(item.action))}});
  }
  nlohmann::json j;
  j["answer"] = r.answer;
  j["evidence"] = std::move(evidence);
  j["subgoals"] = r.plan.subgoals;
  j["satisfaction"] = r.plan.satisfaction;
  j["start_nodes"] = r.start_nodes;
  j["visited"] = r.visit_order;
  j["refined_query"] = r.refined_query ? nlohmann::json(*r.refined_query) : nlohmann::json(nullptr);
  j["stats"] = r.stats;
  return j;
}

}  // namespace evmem
