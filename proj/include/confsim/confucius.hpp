#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "confsim/qdisc.hpp"

namespace confsim {

struct ConfuciusConfig {
  double lambda_per_ms = 0.004;      // weight doubling rate; doubling interval = 1/lambda ms
  double alpha = 0.10;               // hysteresis margin around the fair share
  SimTime reweight_period_us = 250'000;
  SimTime reclassify_period_us = 100'000;
  std::array<double, 3> occupancy_targets{0.10, 0.50, 0.90};  // fraction of buffer, Q1..Q3
  SimTime flow_idle_timeout_us = 10'000'000;  // retire flow records with nothing queued
  uint32_t quantum_bytes = kMtuBytes;
};

struct QueueMove {
  SimTime at_us;
  FlowId flow;
  int from_q;
  int to_q;
  char reason;  // 'g' graduation, 'p' promote, 'd' demote, 'q' queue-level move
};

struct ClassifySample {
  SimTime at_us;
  FlowId flow;
  int queue;
  int weight_q128;
  double occupancy_ema;
};

/* Age-weighted, occupancy-classified scheduler. New flows enter a probation
 * queue at a fractional weight (existing/new flow ratio, 1/128 units) that
 * doubles every reweight period; at full weight they graduate to one of three
 * static queues by occupancy. Periodic examinations move flows between the
 * static queues when their share of queued bytes leaves a hysteresis band.
 * The scheduler never reads packet labels. */
class ConfuciusQdisc : public Qdisc {
public:
  static constexpr int kNew = 0;  // queues 1..3 are the static ones
  static constexpr int kNumQueues = 4;

  explicit ConfuciusQdisc(ConfuciusConfig cfg = {});

  void enqueue(Packet&& p, SimTime now) override;
  std::optional<Packet> dequeue(SimTime now) override;
  uint64_t queued_bytes() const override { return total_bytes_; }
  size_t queued_packets() const override { return total_packets_; }
  void attach_timers(TimerService* timers) override;
  std::string name() const override { return "confucius"; }

  const ConfuciusConfig& config() const { return cfg_; }

  // Introspection (tests, diagnostics).
  bool has_flow(FlowId f) const { return flows_.count(f) > 0; }
  int flow_queue(FlowId f) const;
  int flow_weight_q128(FlowId f) const;
  std::pair<int64_t, int64_t> flow_initial_factor(FlowId f) const;
  double flow_occupancy_ema(FlowId f) const;
  uint64_t queue_bytes_of(int q) const { return queues_[q].bytes; }
  int queue_weight_of(int q) const { return queues_[q].weight; }
  std::vector<FlowId> queue_members(int q) const { return queues_[q].members; }
  const std::vector<QueueMove>& moves() const { return moves_; }
  const std::vector<ClassifySample>& classify_log() const { return classify_log_; }
  void set_classify_log_enabled(bool on) { classify_log_enabled_ = on; }
  uint64_t enqueued_count() const { return n_enqueued_; }
  uint64_t dequeued_count() const { return n_dequeued_; }
  uint64_t dropped_count() const { return n_dropped_; }

  // Run the periodic examinations immediately (test hook).
  void force_reclassify(SimTime now) { reclassify(now); }

private:
  struct FlowState {
    FlowId id = 0;
    SimTime arrival_us = 0;
    int64_t factor_num = 1, factor_den = 1;  // initial weight ratio snapshot
    int weight_q128 = 128;
    int queue = kNew;
    SimTime last_shift_us = 0;
    std::deque<Packet> packets;
    uint64_t queued_bytes = 0;
    double ema = 0.0;
    SimTime ema_at_us = 0;
    SimTime last_activity_us = 0;
    int64_t deficit = 0;
    bool in_round = false;
    EventQueue::Handle reweight_timer;
  };

  struct VirtualQueue {
    std::vector<FlowId> members;
    uint64_t bytes = 0;
    int weight = 0;
    int64_t deficit = 0;
    size_t rr = 0;
    bool in_round = false;
    int streak = 0;  // consecutive periods past the midpoint toward the next queue
  };

  FlowState& create_flow(FlowId id, SimTime now);
  void finalize_epoch(SimTime now);
  void set_initial_weight(FlowState& f);
  void schedule_reweight(FlowState& f);
  void on_reweight(FlowId id);
  void graduate(FlowState& f, SimTime now);
  void move_flow(FlowState& f, int to_q, SimTime now, char reason);
  void reclassify(SimTime now);
  void arm_reclassify(SimTime at);
  void retire_idle(SimTime now);
  void sample_occupancy(int q, SimTime now);
  void recompute_queue_weight(int q);
  void remove_member(int q, FlowId id);
  void drop_for_space(SimTime now);
  int existing_flow_count() const;
  SimTime doubling_interval_us() const;

  ConfuciusConfig cfg_;
  TimerService* timers_ = nullptr;
  std::map<FlowId, FlowState> flows_;
  std::array<VirtualQueue, kNumQueues> queues_;
  size_t cursor_ = 0;
  uint64_t total_bytes_ = 0;
  size_t total_packets_ = 0;
  uint64_t enq_order_ = 0;
  uint64_t n_enqueued_ = 0, n_dequeued_ = 0, n_dropped_ = 0;

  SimTime epoch_us_ = -1;
  std::vector<FlowId> epoch_flows_;
  bool epoch_finalize_pending_ = false;
  bool reclassify_armed_ = false;

  std::vector<QueueMove> moves_;
  std::vector<ClassifySample> classify_log_;
  bool classify_log_enabled_ = false;
};

} // namespace confsim
