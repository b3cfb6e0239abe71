#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace evmem {

/// Global exploration queue. Highest priority pops first; equal priorities pop
/// in insertion order. An id can be enqueued only once over the queue's life.
class FrontierQueue {
 public:
  struct Entry {
    std::string id;
    double priority = 0.0;
    std::uint64_t seq = 0;
  };

  bool push(const std::string& id, double priority) {
    if (!ever_.insert(id).second) return false;
    heap_.push({id, priority, next_seq_++});
    return true;
  }

  std::optional<Entry> pop() {
    if (heap_.empty()) return std::nullopt;
    Entry e = heap_.top();
    heap_.pop();
    return e;
  }

  bool was_enqueued(const std::string& id) const { return ever_.contains(id); }
  std::size_t size() const { return heap_.size(); }
  bool empty() const { return heap_.empty(); }

 private:
  struct Lower {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.priority != b.priority) return a.priority < b.priority;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Lower> heap_;
  std::set<std::string> ever_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace evmem
