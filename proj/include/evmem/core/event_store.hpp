#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "evmem/core/ids.hpp"
#include "evmem/core/types.hpp"
#include "evmem/error.hpp"

namespace evmem {

/// The event graph: events keyed by id plus typed, directed relations with an
/// adjacency index for both directions. Iteration order is always by id so
/// every consumer sees the same order.
class EventStore {
 public:
  using RelationKey = std::tuple<std::string, std::string, std::string>;  // src, dst, label

  explicit EventStore(std::uint64_t id_seed = 0) : ids_(id_seed) {}

  /// Validates and inserts. An empty id is replaced by a freshly generated one.
  /// Returns the stored id.
  std::string add_event(Event e) {
    if (e.id.empty()) e.id = ids_.next();
    validate_event(e);
    if (events_.contains(e.id)) throw Error(ErrorCode::validation, "duplicate event id " + e.id);
    if (dim_ == 0) dim_ = e.embedding.size();
    ids_.observe(e.id);
    const std::string id = e.id;
    events_.emplace(id, std::move(e));
    adjacency_[id];
    return id;
  }

  /// Replaces an existing event's attributes in place (used by node fusion).
  void update_event(Event e) {
    auto it = events_.find(e.id);
    if (it == events_.end()) throw Error(ErrorCode::unknown_id, "no event " + e.id);
    validate_event(e);
    it->second = std::move(e);
  }

  /// Returns true when the edge is new; re-adding (src, dst, label) is a no-op.
  bool add_relation(Relation r) {
    if (r.src == r.dst) throw Error(ErrorCode::validation, "self-loop on " + r.src);
    if (!is_snake_token(r.label)) throw Error(ErrorCode::validation, "relation label '" + r.label + "' is not snake_case");
    if (!events_.contains(r.src)) throw Error(ErrorCode::dangling_endpoint, "relation source " + r.src + " not found");
    if (!events_.contains(r.dst)) throw Error(ErrorCode::dangling_endpoint, "relation target " + r.dst + " not found");
    RelationKey key{r.src, r.dst, r.label};
    if (relations_.contains(key)) return false;
    adjacency_[r.src].emplace(r.dst, r.label, Direction::out);
    adjacency_[r.dst].emplace(r.src, r.label, Direction::in);
    relations_.emplace(std::move(key), std::move(r));
    return true;
  }

  /// Incoming and outgoing typed edges of `id`, ordered by neighbor id then label.
  std::vector<Neighbor> neighbors(const std::string& id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) throw Error(ErrorCode::unknown_id, "no event " + id);
    std::vector<Neighbor> out;
    out.reserve(it->second.size());
    for (const auto& [nid, label, dir] : it->second) out.push_back({events_.at(nid), label, dir});
    return out;
  }

  bool contains(const std::string& id) const { return events_.contains(id); }
  const Event* find(const std::string& id) const {
    auto it = events_.find(id);
    return it == events_.end() ? nullptr : &it->second;
  }
  const Event& event(const std::string& id) const {
    auto it = events_.find(id);
    if (it == events_.end()) throw Error(ErrorCode::unknown_id, "no event " + id);
    return it->second;
  }

  const std::map<std::string, Event>& events() const { return events_; }
  const std::map<RelationKey, Relation>& relations() const { return relations_; }
  std::size_t event_count() const { return events_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  bool empty() const { return events_.empty(); }
  std::size_t dimension() const { return dim_; }

  /// Fixes the embedding dimension before the first insert.
  void set_dimension(std::size_t dim) {
    if (!events_.empty() && dim != dim_) throw Error(ErrorCode::dimension_mismatch, "store already has events");
    dim_ = dim;
  }

  std::string next_id() { return ids_.next(); }

  /// Throws if any edge endpoint is missing. Holds by construction; exposed for loaders and tests.
  void check_integrity() const {
    for (const auto& [key, r] : relations_) {
      if (!events_.contains(r.src) || !events_.contains(r.dst))
        throw Error(ErrorCode::dangling_endpoint, "relation " + r.src + " -> " + r.dst + " dangles");
    }
  }

  bool operator==(const EventStore& o) const { return events_ == o.events_ && relations_ == o.relations_; }

 private:
  void validate_event(const Event& e) const {
    if (e.span.empty()) throw Error(ErrorCode::validation, "event " + e.id + " has an empty span");
    if (e.summary.empty()) throw Error(ErrorCode::validation, "event " + e.id + " has an empty summary");
    if (e.participants.size() > kMaxParticipants)
      throw Error(ErrorCode::validation, "event " + e.id + " lists more than 3 participants");
    if (e.embedding.empty()) throw Error(ErrorCode::validation, "event " + e.id + " has no embedding");
    if (dim_ != 0 && e.embedding.size() != dim_) {
      throw Error(ErrorCode::dimension_mismatch, "event " + e.id + " embedding has dimension " +
                                                     std::to_string(e.embedding.size()) + ", store uses " +
                                                     std::to_string(dim_));
    }
  }

  IdGenerator ids_;
  std::size_t dim_ = 0;
  std::map<std::string, Event> events_;
  std::map<RelationKey, Relation> relations_;
  std::map<std::string, std::set<std::tuple<std::string, std::string, Direction>>> adjacency_;
};

}  // namespace evmem
