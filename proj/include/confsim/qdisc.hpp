#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "confsim/event_queue.hpp"
#include "confsim/packet.hpp"

namespace confsim {

/* Timer access handed to schedulers that need periodic work. Backed by the
 * simulation's event queue; tests may pump a standalone EventQueue directly. */
class TimerService {
public:
  explicit TimerService(EventQueue& q) : q_(q) {}
  SimTime now() const { return q_.now(); }
  EventQueue::Handle schedule(SimTime at, EventQueue::Callback cb) {
    return q_.schedule(at, std::move(cb));
  }
  void cancel(const EventQueue::Handle& h) { q_.cancel(h); }

private:
  EventQueue& q_;
};

/* Packet scheduler attached to a link. Enqueue may drop (buffer policy);
 * dequeue returns the next packet to serialize or nullopt when idle.
 * Implementations must be work-conserving: queued_bytes() > 0 implies
 * dequeue() yields a packet. */
class Qdisc {
public:
  using DropCallback = std::function<void(const Packet&, SimTime)>;

  virtual ~Qdisc() = default;

  virtual void enqueue(Packet&& p, SimTime now) = 0;
  virtual std::optional<Packet> dequeue(SimTime now) = 0;
  virtual uint64_t queued_bytes() const = 0;
  virtual size_t queued_packets() const = 0;

  virtual void attach_timers(TimerService* /*timers*/) {}
  virtual std::string name() const = 0;

  void set_buffer_limit(uint64_t bytes) { buffer_limit_ = bytes; }
  uint64_t buffer_limit() const { return buffer_limit_; }
  void set_drop_callback(DropCallback cb) { on_drop_ = std::move(cb); }

protected:
  void report_drop(const Packet& p, SimTime now) {
    if (on_drop_) on_drop_(p, now);
  }

  uint64_t buffer_limit_ = 250'000;
  DropCallback on_drop_;
};

} // namespace confsim
