#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evmem/core/event_store.hpp"
#include "evmem/core/types.hpp"
#include "evmem/topics/kmeans.hpp"

namespace evmem {

/// Coarse topic clustering over the events of a store. Topics partition the
/// assigned events; every centroid is the exact mean of its members' embeddings.
struct TopicState {
  std::vector<Topic> topics;
  int step_counter = 0;
  int recluster_period = 4;
  double assign_threshold = 0.9;
  std::uint64_t seed = 42;
  bool initialized = false;
  std::uint64_t next_topic_seq = 1;

  /// Topic index holding `event_id`, if any.
  std::optional<std::size_t> topic_of(const std::string& event_id) const {
    for (std::size_t t = 0; t < topics.size(); ++t)
      if (std::binary_search(topics[t].members.begin(), topics[t].members.end(), event_id)) return t;
    return std::nullopt;
  }

  std::string fresh_topic_id() {
    std::string digits = std::to_string(next_topic_seq++);
    return "topic-" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
  }

  bool operator==(const TopicState&) const = default;
};

struct TopicAssignment {
  std::string topic_id;
  bool created = false;
  double similarity = 0.0;
};

namespace detail {

inline Vector member_mean(const Topic& t, const EventStore& store, const Event* override_event) {
  std::vector<std::span<const double>> rows;
  rows.reserve(t.members.size());
  for (const auto& m : t.members) {
    if (override_event != nullptr && m == override_event->id) {
      rows.emplace_back(override_event->embedding);
    } else {
      rows.emplace_back(store.event(m).embedding);
    }
  }
  return mean_of(rows);
}

inline double safe_cosine(std::span<const double> a, std::span<const double> b) {
  if (l2_norm(a) == 0.0 || l2_norm(b) == 0.0) return 0.0;
  return cosine_similarity(a, b);
}

}  // namespace detail

/// Builds topics from scratch with k-means over `events` (taken in id order).
/// k follows cluster_count(n), reduced to n when the memory is smaller than two events.
inline void init_topics(TopicState& state, const EventStore& store) {
  if (store.empty()) throw Error(ErrorCode::precondition, "cannot initialize topics without events");
  std::vector<std::string> ids;
  std::vector<Vector> points;
  for (const auto& [id, e] : store.events()) {
    ids.push_back(id);
    points.push_back(e.embedding);
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cluster_count(static_cast<long long>(ids.size()))),
                                       ids.size());
  const auto km = kmeans(points, k, state.seed);
  std::vector<Topic> topics(k);
  for (std::size_t i = 0; i < ids.size(); ++i) topics[km.assignments[i]].members.push_back(ids[i]);
  state.topics.clear();
  for (auto& t : topics) {
    std::sort(t.members.begin(), t.members.end());
    t.id = state.fresh_topic_id();
    t.centroid = detail::member_mean(t, store, nullptr);
    state.topics.push_back(std::move(t));
  }
  state.initialized = true;
}

/// Places `event` in its most similar topic when the cosine to that centroid is
/// at least the threshold (inclusive), otherwise opens a singleton topic. An
/// event that already belongs to a topic (a fused node whose embedding changed)
/// is first withdrawn from it. Embeddings of other members are read from `store`.
inline TopicAssignment assign_event(TopicState& state, const Event& event, const EventStore& store) {
  if (!state.initialized) throw Error(ErrorCode::precondition, "topic layer is not initialized");
  if (auto cur = state.topic_of(event.id)) {
    Topic& t = state.topics[*cur];
    t.members.erase(std::lower_bound(t.members.begin(), t.members.end(), event.id));
    if (t.members.empty()) {
      state.topics.erase(state.topics.begin() + static_cast<std::ptrdiff_t>(*cur));
    } else {
      t.centroid = detail::member_mean(t, store, &event);
    }
  }

  std::optional<std::size_t> best;
  double best_sim = -2.0;
  for (std::size_t t = 0; t < state.topics.size(); ++t) {
    const double s = detail::safe_cosine(event.embedding, state.topics[t].centroid);
    if (s > best_sim) {
      best_sim = s;
      best = t;
    }
  }

  if (best && best_sim >= state.assign_threshold) {
    Topic& t = state.topics[*best];
    t.members.insert(std::lower_bound(t.members.begin(), t.members.end(), event.id), event.id);
    t.centroid = detail::member_mean(t, store, &event);
    return {t.id, false, best_sim};
  }
  Topic fresh;
  fresh.id = state.fresh_topic_id();
  fresh.centroid = event.embedding;
  fresh.members = {event.id};
  state.topics.push_back(fresh);
  return {fresh.id, true, best ? best_sim : 0.0};
}

/// Rebuilds all topics when the step counter is a multiple of the period.
/// Returns true when a rebuild happened.
inline bool recluster_if_due(TopicState& state, const EventStore& store) {
  if (state.step_counter <= 0 || state.step_counter % state.recluster_period != 0 || store.empty()) return false;
  init_topics(state, store);
  return true;
}

/// Checks the partition and centroid-mean invariants against `store`.
/// Returns an empty string when both hold, otherwise a description of the first violation.
inline std::string topic_invariant_violation(const TopicState& state, const EventStore& store, double tol = 1e-9) {
  if (!state.initialized) return {};
  std::map<std::string, int> seen;
  for (const auto& t : state.topics) {
    if (t.members.empty()) return "topic " + t.id + " is empty";
    for (const auto& m : t.members) {
      if (!store.contains(m)) return "topic " + t.id + " references missing event " + m;
      if (++seen[m] > 1) return "event " + m + " is in more than one topic";
    }
    const Vector mean = detail::member_mean(t, store, nullptr);
    for (std::size_t d = 0; d < mean.size(); ++d)
      if (std::abs(mean[d] - t.centroid[d]) > tol) return "centroid of " + t.id + " drifted from the member mean";
  }
  for (const auto& [id, e] : store.events())
    if (!seen.contains(id)) return "event " + id + " has no topic";
  return {};
}

}  // namespace evmem
