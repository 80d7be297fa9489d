#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "confsim/qdisc.hpp"

namespace confsim {

/* Piecewise-constant capacity profile. Steps take effect at the next packet
 * serialization: a packet in flight finishes at the rate it started with. */
class CapacityProfile {
public:
  struct Step {
    SimTime at_us;
    uint64_t bits_per_sec;
  };

  CapacityProfile() : steps_{{0, 25'000'000}} {}

  explicit CapacityProfile(std::vector<Step> steps) : steps_(std::move(steps)) {
    if (steps_.empty() || steps_.front().at_us != 0) {
      throw std::invalid_argument("capacity profile must start at t=0");
    }
    for (size_t i = 0; i < steps_.size(); i++) {
      if (steps_[i].bits_per_sec == 0) {
        throw std::invalid_argument("capacity must stay positive");
      }
      if (i > 0 && steps_[i].at_us <= steps_[i - 1].at_us) {
        throw std::invalid_argument("capacity step times must be strictly increasing");
      }
    }
  }

  static CapacityProfile constant(uint64_t bits_per_sec) {
    return CapacityProfile({{0, bits_per_sec}});
  }

  uint64_t at(SimTime t) const {
    size_t lo = 0, hi = steps_.size();
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (steps_[mid].at_us <= t) lo = mid; else hi = mid;
    }
    return steps_[lo].bits_per_sec;
  }

  uint64_t peak() const {
    uint64_t m = 0;
    for (const auto& s : steps_) m = std::max(m, s.bits_per_sec);
    return m;
  }

  double mean_bps(SimTime horizon_us) const;

  const std::vector<Step>& steps() const { return steps_; }

private:
  std::vector<Step> steps_;
};

/* One store-and-forward hop: scheduler -> serializer -> propagation.
 * Serialization happens at the capacity in force at dequeue time; sub-
 * microsecond residue carries over so long-run throughput is exact. */
class Link {
public:
  using DeliveryCallback = std::function<void(Packet&&, SimTime)>;

  Link(EventQueue& events, CapacityProfile profile, SimTime prop_one_way_us,
       std::unique_ptr<Qdisc> qdisc)
      : events_(events),
        profile_(std::move(profile)),
        prop_us_(prop_one_way_us),
        qdisc_(std::move(qdisc)),
        timers_(events) {
    qdisc_->attach_timers(&timers_);
  }

  void set_delivery_callback(DeliveryCallback cb) { on_delivery_ = std::move(cb); }

  Qdisc& qdisc() { return *qdisc_; }
  const CapacityProfile& profile() const { return profile_; }
  SimTime prop_us() const { return prop_us_; }

  void enqueue(Packet&& p) {
    SimTime now = events_.now();
    p.enqueued_us = now;
    qdisc_->enqueue(std::move(p), now);
    if (!busy_) serve_next();
  }

  uint64_t busy_us() const { return busy_accum_us_; }

private:
  void serve_next() {
    SimTime now = events_.now();
    auto p = qdisc_->dequeue(now);
    if (!p) {
      busy_ = false;
      return;
    }
    busy_ = true;
    uint64_t cap = profile_.at(now);
    uint64_t num = static_cast<uint64_t>(p->size) * 8u * 1'000'000u + tx_residue_;
    SimTime tx_us = static_cast<SimTime>(num / cap);
    tx_residue_ = num % cap;
    busy_accum_us_ += tx_us;
    SimTime done = now + tx_us;
    Packet pkt = std::move(*p);
    events_.schedule(done, [this, pkt = std::move(pkt)]() mutable {
      SimTime deliver_at = events_.now() + prop_us_;
      if (on_delivery_) {
        events_.schedule(deliver_at, [this, pkt = std::move(pkt)]() mutable {
          on_delivery_(std::move(pkt), events_.now());
        });
      }
      serve_next();
    });
  }

  EventQueue& events_;
  CapacityProfile profile_;
  SimTime prop_us_;
  std::unique_ptr<Qdisc> qdisc_;
  TimerService timers_;
  DeliveryCallback on_delivery_;
  bool busy_ = false;
  uint64_t tx_residue_ = 0;
  uint64_t busy_accum_us_ = 0;
};

} // namespace confsim
