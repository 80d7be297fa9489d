#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "confsim/qdisc.hpp"

namespace confsim {

/* Drop-tail single queue. */
class FifoQdisc : public Qdisc {
public:
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return q_.size(); }
  std::string name() const override { return "fifo"; }

protected:
  std::deque<Packet> q_;
  uint64_t bytes_ = 0;
};

/* Per-flow deficit round robin with equal quanta; overflow drops from the
 * tail of the longest flow queue. */
class FqQdisc : public Qdisc {
public:
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return packets_; }
  std::string name() const override { return "fq"; }

protected:
  struct Flow {
    std::deque<Packet> q;
    uint64_t bytes = 0;
    int64_t deficit = 0;
    bool in_round = false;
  };

  Flow& flow_of(FlowId id);
  void drop_from_longest(SimTime now);

  std::map<FlowId, Flow> flows_;
  std::vector<FlowId> ring_;
  size_t rr_ = 0;
  uint64_t bytes_ = 0;
  size_t packets_ = 0;
  uint32_t quantum_ = kMtuBytes;
};

/* Sojourn-time AQM on one queue: target 5 ms, interval 100 ms. */
class CodelQdisc : public Qdisc {
public:
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return q_.size(); }
  std::string name() const override { return "codel"; }

  static constexpr SimTime kTargetUs = 5'000;
  static constexpr SimTime kIntervalUs = 100'000;

private:
  struct State {
    SimTime first_above = 0;
    SimTime drop_next = 0;
    uint32_t count = 0;
    uint32_t lastcount = 0;
    bool dropping = false;
  };

  std::optional<Packet> pop_head(SimTime now);
  bool should_drop(const Packet& p, SimTime now);
  static SimTime control_law(SimTime t, uint32_t count);

  std::deque<Packet> q_;
  uint64_t bytes_ = 0;
  State st_;
};

/* Per-flow DRR, each flow gated by its own sojourn controller. */
class FqCodelQdisc : public Qdisc {
public:
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return packets_; }
  std::string name() const override { return "fq_codel"; }

private:
  struct CodelState {
    SimTime first_above = 0;
    SimTime drop_next = 0;
    uint32_t count = 0;
    uint32_t lastcount = 0;
    bool dropping = false;
  };
  struct Flow {
    std::deque<Packet> q;
    uint64_t bytes = 0;
    int64_t deficit = 0;
    bool in_round = false;
    CodelState codel;
  };

  Flow& flow_of(FlowId id);
  void drop_from_longest(SimTime now);
  std::optional<Packet> codel_pop(Flow& f, SimTime now);

  std::map<FlowId, Flow> flows_;
  std::vector<FlowId> ring_;
  size_t rr_ = 0;
  uint64_t bytes_ = 0;
  size_t packets_ = 0;
  uint32_t quantum_ = kMtuBytes;
};

/* Random early detection on the EWMA backlog. */
class RedQdisc : public Qdisc {
public:
  explicit RedQdisc(uint64_t seed = 1);
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return q_.size(); }
  std::string name() const override { return "red"; }

  static constexpr double kMinBytes = 30'000.0;
  static constexpr double kMaxBytes = 90'000.0;
  static constexpr double kPMax = 0.1;
  static constexpr double kWeight = 0.002;

  double avg() const { return avg_; }

private:
  std::deque<Packet> q_;
  uint64_t bytes_ = 0;
  double avg_ = 0.0;
  std::mt19937_64 rng_;
};

/* Least-attained-service priority: flows demote through levels as their
 * dequeued bytes pass the thresholds; lowest level serves first. */
class SjfQdisc : public Qdisc {
public:
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return packets_; }
  std::string name() const override { return "sjf"; }

  static constexpr uint64_t kThresholds[3] = {100'000, 1'000'000, 10'000'000};
  int flow_level(FlowId id) const;

private:
  struct Flow {
    std::deque<Packet> q;
    uint64_t bytes = 0;
    uint64_t attained = 0;
    int level = 0;
    bool in_ring = false;
  };

  void drop_from_longest(SimTime now);

  std::map<FlowId, Flow> flows_;
  std::vector<FlowId> rings_[4];
  size_t rr_[4] = {0, 0, 0, 0};
  uint64_t bytes_ = 0;
  size_t packets_ = 0;
};

/* Two label classes (REALTIME, WEB; unlabeled counts as WEB) scheduled by
 * DWRR with a fixed weight ratio; per-flow DRR inside each class. */
class CbqQdisc : public Qdisc {
public:
  CbqQdisc(int w_realtime, int w_web);
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return packets_; }
  std::string name() const override;

private:
  struct Flow {
    std::deque<Packet> q;
    uint64_t bytes = 0;
    int64_t deficit = 0;
    bool in_round = false;
  };
  struct Class {
    std::map<FlowId, Flow> flows;
    std::vector<FlowId> ring;
    size_t rr = 0;
    uint64_t bytes = 0;
    int64_t deficit = 0;
    bool in_round = false;
    int weight = 1;
  };

  std::optional<Packet> class_pop(Class& c);
  void drop_from_longest(SimTime now);

  Class cls_[2];  // 0 realtime, 1 web
  size_t cursor_ = 0;
  uint64_t bytes_ = 0;
  size_t packets_ = 0;
  int w_rt_, w_web_;
};

/* Strict priority: realtime label always first. */
class StrictQdisc : public Qdisc {
public:
  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return bytes_; }
  size_t queued_packets() const override { return packets_; }
  std::string name() const override { return "strict"; }

private:
  std::deque<Packet> rt_, web_;
  uint64_t bytes_ = 0;
  size_t packets_ = 0;
};

struct ConfuciusConfig;
std::unique_ptr<Qdisc> make_qdisc(const std::string& name, uint64_t seed,
                                  const ConfuciusConfig& confucius_cfg);

} // namespace confsim
