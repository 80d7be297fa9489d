#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>

#include "confsim/time_types.hpp"

namespace confsim {

/* Deterministic event queue: events fire in (time, insertion sequence) order,
 * so same-timestamp events run in the order they were scheduled. */
class EventQueue {
public:
  using Callback = std::function<void()>;

  struct Handle {
    SimTime at = -1;
    uint64_t seq = 0;
    bool valid() const { return at >= 0; }
  };

  SimTime now() const { return now_; }
  bool empty() const { return events_.empty(); }
  size_t size() const { return events_.size(); }

  Handle schedule(SimTime at, Callback cb) {
    if (at < now_) {
      throw std::invalid_argument("schedule: event time precedes current time");
    }
    Handle h{at, next_seq_++};
    events_.emplace(Key{at, h.seq}, std::move(cb));
    return h;
  }

  /* Cancel is a no-op if the event already fired. */
  void cancel(const Handle& h) {
    if (!h.valid()) return;
    events_.erase(Key{h.at, h.seq});
  }

  /* Run events with timestamp <= t_end; clock lands on t_end. */
  void run_until(SimTime t_end) {
    while (!events_.empty()) {
      auto it = events_.begin();
      if (it->first.at > t_end) break;
      now_ = it->first.at;
      Callback cb = std::move(it->second);
      events_.erase(it);
      cb();
    }
    if (t_end > now_) now_ = t_end;
  }

private:
  struct Key {
    SimTime at;
    uint64_t seq;
    bool operator<(const Key& o) const {
      return at != o.at ? at < o.at : seq < o.seq;
    }
  };

  std::map<Key, Callback> events_;
  SimTime now_ = 0;
  uint64_t next_seq_ = 0;
};

} // namespace confsim
