#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "evmem/construction/ingest.hpp"
#include "evmem/core/embedding.hpp"
#include "evmem/core/memory.hpp"
#include "evmem/llm/call.hpp"
#include "evmem/llm/parsers.hpp"

namespace evmem {

/// Events and relations extracted from one batch, over provisional ids.
struct SubMemory {
  std::vector<Event> events;
  std::vector<Relation> relations;
};

struct IntegrationReport {
  std::vector<std::pair<std::string, std::string>> merged;  // (provisional id, existing id)
  std::vector<Relation> linked;                             // new-event -> existing-event edges
  std::vector<std::string> inserted;                        // final ids of new nodes
  std::map<std::string, std::string> id_remap;              // provisional -> final
  std::size_t relations_added = 0;
  std::size_t coreference_calls = 0;
  std::size_t coreference_failures = 0;
  std::vector<std::string> warnings;
};

struct StepReport {
  std::string session_id;
  int step = 0;
  std::size_t extracted_events = 0;
  std::size_t extracted_relations = 0;
  IntegrationReport integration;
  bool topics_initialized = false;
  bool reclustered = false;
  std::vector<std::string> warnings;
};

struct MergeCandidate {
  std::string event_id;
  double similarity = 0.0;
};

namespace detail {

inline std::string format_dialog(const Session& s) {
  std::string out;
  for (const auto& u : s.utterances) {
    out += "[" + u.id + "]";
    if (!u.timestamp.empty()) out += " (" + u.timestamp + ")";
    out += " " + (u.speaker.empty() ? std::string("Unknown") : u.speaker) + ": " + u.text + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

inline std::string describe_event(const Event& e) {
  std::string out = "Summary: " + e.summary;
  out += "\nTime: " + (e.time_info.empty() ? std::string("unknown") : e.time_info);
  if (!e.observed_at.empty()) out += "\nRecorded: " + e.observed_at;
  out += "\nParticipants: " + (e.participants.empty() ? std::string("unknown") : join(e.participants, ", "));
  return out;
}

inline std::vector<std::string> split_summary(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(" | ", start);
    parts.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 3;
  }
  return parts;
}

}  // namespace detail

struct SegmentResult {
  std::vector<Event> events;  // provisional ids, chronological
  std::vector<std::string> warnings;
};

/// Segments one batch into events with the extraction prompt. Span entries
/// naming utterances outside the batch are dropped; an event left with an
/// empty span is dropped. Events come back ordered by their earliest utterance.
inline SegmentResult segment_events(const Session& batch, ChatProvider& llm, const Embedder& embedder,
                                    const Config& config) {
  if (batch.utterances.empty()) throw Error(ErrorCode::validation, "cannot segment an empty batch");
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < batch.utterances.size(); ++i) position.emplace(batch.utterances[i].id, i);

  const auto dialog = detail::format_dialog(batch);
  const auto request =
      make_request(tmpl::kEventExtraction, {{"dialog", dialog}}, {{"session", batch.id}, {"dialog", dialog}}, config);
  EventExtraction parsed;
  try {
    parsed = chat_and_parse(llm, request, config.llm_retries, parse_event_extraction);
  } catch (const Error& e) {
    throw Error(ErrorCode::batch_failed, "event segmentation of session " + batch.id + " failed: " + e.what());
  }

  SegmentResult out;
  out.warnings = parsed.warnings;
  std::set<std::string> used_ids;
  std::vector<std::pair<std::size_t, Event>> keyed;
  std::size_t index = 0;
  for (auto& rec : parsed.events) {
    ++index;
    Event e;
    e.id = rec.provisional_id.empty() ? "E" + std::to_string(index) : rec.provisional_id;
    if (!used_ids.insert(e.id).second) {
      const std::string renamed = e.id + "#" + std::to_string(index);
      detail::warn(out.warnings, "duplicate provisional id " + e.id + "; renamed to " + renamed);
      e.id = renamed;
      used_ids.insert(e.id);
    }
    std::set<std::size_t> span_pos;
    for (const auto& uid : rec.utterance_ids) {
      auto it = position.find(uid);
      if (it == position.end()) {
        detail::warn(out.warnings, "event " + e.id + " cites unknown utterance " + uid + "; dropped from span");
        continue;
      }
      span_pos.insert(it->second);
    }
    if (span_pos.empty()) {
      detail::warn(out.warnings, "event " + e.id + " has no valid utterances; event dropped");
      continue;
    }
    for (auto p : span_pos) e.span.push_back(batch.utterances[p].id);
    e.summary = rec.summary;
    e.time_info = std::string(detail::trim(rec.time));
    for (auto& p : rec.people) {
      auto name = std::string(detail::trim(p));
      if (!name.empty() && std::find(e.participants.begin(), e.participants.end(), name) == e.participants.end())
        e.participants.push_back(std::move(name));
    }
    if (e.participants.size() > kMaxParticipants) e.participants.resize(kMaxParticipants);
    e.session_ids.insert(batch.id);
    e.observed_at = batch.utterances[*span_pos.begin()].timestamp;
    keyed.emplace_back(*span_pos.begin(), std::move(e));
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::string> summaries;
  for (auto& [pos, e] : keyed) summaries.push_back(e.summary);
  const auto vectors = summaries.empty() ? std::vector<Vector>{} : embedder.embed_batch(summaries);
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    keyed[i].second.embedding = vectors[i];
    out.events.push_back(std::move(keyed[i].second));
  }
  return out;
}

struct RelationResult {
  std::vector<Relation> relations;  // provisional ids
  std::vector<std::string> warnings;
};

/// Extracts typed relations among the events of one batch. Relations naming
/// unknown events, self-loops and unusable labels are dropped with a warning.
inline RelationResult extract_relations(const Session& batch, const std::vector<Event>& events, ChatProvider& llm,
                                        const Config& config) {
  RelationResult out;
  if (events.size() < 2) return out;
  std::set<std::string> event_ids;
  std::string events_text;
  for (const auto& e : events) {
    event_ids.insert(e.id);
    events_text += e.id + ": " + e.summary;
    if (!e.time_info.empty()) events_text += " (time: " + e.time_info + ")";
    if (!e.participants.empty()) events_text += " (people: " + detail::join(e.participants, ", ") + ")";
    events_text += "\n";
  }
  events_text.pop_back();
  std::set<std::string> utterance_ids;
  for (const auto& u : batch.utterances) utterance_ids.insert(u.id);

  const auto dialog = detail::format_dialog(batch);
  const auto request = make_request(tmpl::kRelationExtraction, {{"events", events_text}, {"dialog", dialog}},
                                    {{"session", batch.id}, {"events", events_text}}, config);
  RelationExtraction parsed;
  try {
    parsed = chat_and_parse(llm, request, config.llm_retries, parse_relation_extraction);
  } catch (const Error& e) {
    throw Error(ErrorCode::batch_failed, "relation extraction of session " + batch.id + " failed: " + e.what());
  }
  out.warnings = parsed.warnings;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (auto& r : parsed.relations) {
    if (!event_ids.contains(r.source) || !event_ids.contains(r.target)) {
      detail::warn(out.warnings, "relation " + r.source + " -> " + r.target + " names an unknown event; dropped");
      continue;
    }
    if (r.source == r.target) {
      detail::warn(out.warnings, "self-loop on " + r.source + " dropped");
      continue;
    }
    auto label = normalize_label(r.type);
    if (label.empty()) {
      detail::warn(out.warnings, "relation " + r.source + " -> " + r.target + " has no usable label; dropped");
      continue;
    }
    if (!seen.emplace(r.source, r.target, label).second) continue;
    Relation rel{r.source, r.target, std::move(label), {}};
    for (auto& ev : r.evidence) {
      if (utterance_ids.contains(ev)) {
        rel.evidence.push_back(std::move(ev));
      } else {
        detail::warn(out.warnings, "evidence id " + ev + " is not in the batch; dropped");
      }
    }
    out.relations.push_back(std::move(rel));
  }
  return out;
}

/// Existing event with the highest cosine similarity to `event`; ties go to the
/// smallest id. When `among` is given only those ids are considered.
inline std::optional<MergeCandidate> find_merge_candidate(const EventStore& store, const Event& event,
                                                          const std::set<std::string>* among = nullptr) {
  std::optional<MergeCandidate> best;
  for (const auto& [id, e] : store.events()) {
    if (among != nullptr && !among->contains(id)) continue;
    const double s = cosine_similarity(event.embedding, e.embedding);
    if (!best || s > best->similarity) best = MergeCandidate{id, s};
  }
  return best;
}

struct MergeResult {
  Event event;
  std::vector<std::string> warnings;
};

/// Fuses `incoming` into `existing`, keeping the existing id. Spans, sessions and
/// participants are unioned (participants capped at 3, existing first); a
/// summary not already present is appended after " | " and the embedding is
/// recomputed from the merged summary.
inline MergeResult merge_events(const Event& existing, const Event& incoming, const Embedder& embedder) {
  MergeResult out{existing, {}};
  Event& m = out.event;
  for (const auto& u : incoming.span)
    if (std::find(m.span.begin(), m.span.end(), u) == m.span.end()) m.span.push_back(u);
  for (const auto& p : incoming.participants) {
    if (std::find(m.participants.begin(), m.participants.end(), p) != m.participants.end()) continue;
    if (m.participants.size() >= kMaxParticipants) {
      detail::warn(out.warnings, "participant " + p + " dropped: event " + m.id + " already lists 3 people");
      continue;
    }
    m.participants.push_back(p);
  }
  m.session_ids.insert(incoming.session_ids.begin(), incoming.session_ids.end());
  const auto parts = detail::split_summary(m.summary);
  const bool known = std::find(parts.begin(), parts.end(), incoming.summary) != parts.end();
  if (!known) m.summary += " | " + incoming.summary;
  if (m.time_info.empty()) m.time_info = incoming.time_info;
  if (m.observed_at.empty() || (!incoming.observed_at.empty() && incoming.observed_at < m.observed_at))
    m.observed_at = incoming.observed_at.empty() ? m.observed_at : incoming.observed_at;
  if (!known) m.embedding = embedder.embed(m.summary);
  return out;
}

/// Integrates a batch into the store: per new event, in batch order, an
/// embedding prefilter against pre-existing events and, above the merge
/// threshold, a coreference verdict decide between merge, insert+link and plain
/// insert. Batch relations are then added under the id remap and each touched
/// event goes through topic assignment (once the topic layer exists).
inline IntegrationReport integrate_submemory(EventStore& store, TopicState& topics, const SubMemory& sub,
                                             const Config& config, ChatProvider& llm, const Embedder& embedder) {
  IntegrationReport report;
  std::set<std::string> pre_existing;
  for (const auto& [id, e] : store.events()) pre_existing.insert(id);
  std::vector<std::string> touched;

  for (const auto& incoming : sub.events) {
    const auto cand = find_merge_candidate(store, incoming, &pre_existing);
    std::optional<CoreferenceVerdict> verdict;
    if (cand && cand->similarity >= config.merge_threshold) {
      const Event& existing = store.event(cand->event_id);
      const auto request = make_request(
          tmpl::kCoreference, {{"event_a", detail::describe_event(existing)}, {"event_b", detail::describe_event(incoming)}},
          {{"event_a", existing.summary}, {"event_b", incoming.summary}}, config);
      ++report.coreference_calls;
      try {
        verdict = chat_and_parse(llm, request, config.llm_retries, parse_coreference);
      } catch (const Error& e) {
        ++report.coreference_failures;
        detail::warn(report.warnings, "coreference check for " + incoming.id + " failed (" + e.what() +
                                          "); inserting as a new node");
      }
      if (verdict && verdict->same_event) {
        auto merged = merge_events(existing, incoming, embedder);
        for (auto& w : merged.warnings) report.warnings.push_back(std::move(w));
        store.update_event(merged.event);
        report.merged.emplace_back(incoming.id, cand->event_id);
        report.id_remap[incoming.id] = cand->event_id;
        touched.push_back(cand->event_id);
        continue;
      }
    }
    Event fresh = incoming;
    fresh.id.clear();
    const auto new_id = store.add_event(std::move(fresh));
    report.inserted.push_back(new_id);
    report.id_remap[incoming.id] = new_id;
    touched.push_back(new_id);
    if (verdict && verdict->has_overlap && verdict->relation_type) {
      auto label = normalize_label(*verdict->relation_type);
      if (!label.empty()) {
        Relation link{new_id, cand->event_id, std::move(label), {}};
        if (store.add_relation(link)) ++report.relations_added;
        report.linked.push_back(std::move(link));
      }
    }
  }

  for (const auto& r : sub.relations) {
    auto src = report.id_remap.find(r.src);
    auto dst = report.id_remap.find(r.dst);
    if (src == report.id_remap.end() || dst == report.id_remap.end()) {
      detail::warn(report.warnings, "batch relation " + r.src + " -> " + r.dst + " references a dropped event");
      continue;
    }
    if (src->second == dst->second) continue;  // both ends fused into one node
    if (store.add_relation({src->second, dst->second, r.label, r.evidence})) ++report.relations_added;
  }

  if (topics.initialized) {
    std::set<std::string> done;
    for (const auto& id : touched)
      if (done.insert(id).second) assign_event(topics, store.event(id), store);
  }
  return report;
}

/// One construction step over one session, applied transactionally: on any
/// failure `memory` is left untouched.
inline StepReport construction_step(Memory& memory, const Session& batch, ChatProvider& llm, const Embedder& embedder) {
  if (embedder.dimension() != memory.store.dimension()) {
    throw Error(ErrorCode::dimension_mismatch, "embedder dimension " + std::to_string(embedder.dimension()) +
                                                   " does not match the store's " +
                                                   std::to_string(memory.store.dimension()));
  }
  Memory work = memory;
  StepReport report;
  report.session_id = batch.id;

  auto seg = segment_events(batch, llm, embedder, work.config);
  auto rel = extract_relations(batch, seg.events, llm, work.config);
  report.extracted_events = seg.events.size();
  report.extracted_relations = rel.relations.size();
  report.warnings = std::move(seg.warnings);
  report.warnings.insert(report.warnings.end(), rel.warnings.begin(), rel.warnings.end());

  SubMemory sub{std::move(seg.events), std::move(rel.relations)};
  report.integration = integrate_submemory(work.store, work.topics, sub, work.config, llm, embedder);

  bool fresh_topics = false;
  if (!work.topics.initialized && !work.store.empty()) {
    init_topics(work.topics, work.store);
    fresh_topics = true;
  }
  report.topics_initialized = fresh_topics;
  ++work.topics.step_counter;
  report.step = work.topics.step_counter;
  if (!fresh_topics) report.reclustered = recluster_if_due(work.topics, work.store);

  memory = std::move(work);
  spdlog::info("session {}: {} events extracted, {} inserted, {} merged, {} relations added", batch.id,
               report.extracted_events, report.integration.inserted.size(), report.integration.merged.size(),
               report.integration.relations_added);
  return report;
}

}  // namespace evmem
