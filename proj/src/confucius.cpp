#include "confsim/confucius.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confsim {

ConfuciusQdisc::ConfuciusQdisc(ConfuciusConfig cfg) : cfg_(cfg) {
  if (cfg_.lambda_per_ms <= 0.0) throw std::invalid_argument("lambda must be positive");
  if (cfg_.alpha <= 0.0 || cfg_.alpha >= 0.5) {
    throw std::invalid_argument("alpha must lie in (0, 1/2)");
  }
  if (cfg_.reweight_period_us <= 0 || cfg_.reclassify_period_us <= 0) {
    throw std::invalid_argument("periods must be positive");
  }
  if (cfg_.occupancy_targets.front() <= 0.0 || cfg_.occupancy_targets.back() >= 1.0) {
    throw std::invalid_argument("occupancy targets must lie in (0, 1)");
  }
  for (size_t i = 1; i < cfg_.occupancy_targets.size(); i++) {
    if (cfg_.occupancy_targets[i] <= cfg_.occupancy_targets[i - 1]) {
      throw std::invalid_argument("occupancy targets must increase");
    }
  }
}

void ConfuciusQdisc::attach_timers(TimerService* timers) { timers_ = timers; }

SimTime ConfuciusQdisc::doubling_interval_us() const {
  return static_cast<SimTime>(1000.0 / cfg_.lambda_per_ms + 0.5);
}

int ConfuciusQdisc::existing_flow_count() const {
  int n = 0;
  for (int q = 1; q < kNumQueues; q++) n += static_cast<int>(queues_[q].members.size());
  return n;
}

ConfuciusQdisc::FlowState& ConfuciusQdisc::create_flow(FlowId id, SimTime now) {
  FlowState f;
  f.id = id;
  f.arrival_us = now;
  f.last_shift_us = now;
  f.ema_at_us = now;
  f.last_activity_us = now;
  auto [it, ok] = flows_.emplace(id, std::move(f));
  (void)ok;
  queues_[kNew].members.push_back(id);

  // Arrivals sharing one timestamp share one population snapshot: the factor
  // is finalized once the instant is over, counting all of them as new.
  if (epoch_us_ != now) {
    epoch_us_ = now;
    epoch_flows_.clear();
  }
  epoch_flows_.push_back(id);
  set_initial_weight(it->second);
  recompute_queue_weight(kNew);
  if (!epoch_finalize_pending_) {
    epoch_finalize_pending_ = true;
    timers_->schedule(now, [this]() { finalize_epoch(timers_->now()); });
  }
  return it->second;
}

void ConfuciusQdisc::set_initial_weight(FlowState& f) {
  // Both counts floor at 1: a lone first flow gets 1/1 and starts at full
  // weight; simultaneous first flows still probate against each other.
  int f_ext = std::max(1, existing_flow_count());
  int q_new = std::max<int>(1, static_cast<int>(queues_[kNew].members.size()));
  f.factor_num = f_ext;
  f.factor_den = q_new;
  double w = 128.0 * static_cast<double>(f.factor_num) / static_cast<double>(f.factor_den);
  f.weight_q128 = std::clamp(static_cast<int>(std::lround(w)), 1, 128);
}

void ConfuciusQdisc::finalize_epoch(SimTime now) {
  epoch_finalize_pending_ = false;
  // Re-snapshot every still-new flow of this instant, then graduate the ones
  // that start at full weight.
  std::vector<FlowId> grads;
  for (FlowId id : epoch_flows_) {
    auto it = flows_.find(id);
    if (it == flows_.end() || it->second.queue != kNew) continue;
    set_initial_weight(it->second);
    if (it->second.weight_q128 >= 128) grads.push_back(id);
  }
  recompute_queue_weight(kNew);
  for (FlowId id : grads) {
    auto it = flows_.find(id);
    if (it != flows_.end() && it->second.queue == kNew) graduate(it->second, now);
  }
  for (FlowId id : epoch_flows_) {
    auto it = flows_.find(id);
    if (it != flows_.end() && it->second.queue == kNew) schedule_reweight(it->second);
  }
  epoch_flows_.clear();
}

void ConfuciusQdisc::schedule_reweight(FlowState& f) {
  FlowId id = f.id;
  f.reweight_timer =
      timers_->schedule(timers_->now() + cfg_.reweight_period_us, [this, id]() { on_reweight(id); });
}

void ConfuciusQdisc::on_reweight(FlowId id) {
  auto it = flows_.find(id);
  if (it == flows_.end() || it->second.queue != kNew) return;
  FlowState& f = it->second;
  SimTime now = timers_->now();
  SimTime interval = doubling_interval_us();
  int64_t doublings = (now - f.last_shift_us) / interval;
  if (doublings > 0) {
    int shift = static_cast<int>(std::min<int64_t>(doublings, 8));
    f.weight_q128 = std::min(128, f.weight_q128 << shift);
    f.last_shift_us += doublings * interval;
    recompute_queue_weight(kNew);
  }
  if (f.weight_q128 >= 128) {
    graduate(f, now);
  } else {
    schedule_reweight(f);
  }
}

void ConfuciusQdisc::graduate(FlowState& f, SimTime now) {
  f.weight_q128 = 128;
  // Nearest occupancy target wins; ties go to the calmer queue.
  int best = 1;
  double best_d = 1e9;
  for (int i = 0; i < 3; i++) {
    double d = std::fabs(f.ema - cfg_.occupancy_targets[i]);
    if (d < best_d - 1e-12) {
      best_d = d;
      best = i + 1;
    }
  }
  move_flow(f, best, now, 'g');
}

void ConfuciusQdisc::move_flow(FlowState& f, int to_q, SimTime now, char reason) {
  if (f.queue == to_q) return;
  int from = f.queue;
  remove_member(from, f.id);
  queues_[from].bytes -= f.queued_bytes;
  f.queue = to_q;
  f.deficit = 0;
  f.in_round = false;
  queues_[to_q].members.push_back(f.id);
  queues_[to_q].bytes += f.queued_bytes;
  recompute_queue_weight(from);
  recompute_queue_weight(to_q);
  moves_.push_back({now, f.id, from, to_q, reason});
}

void ConfuciusQdisc::remove_member(int q, FlowId id) {
  auto& vq = queues_[q];
  for (size_t i = 0; i < vq.members.size(); i++) {
    if (vq.members[i] == id) {
      vq.members.erase(vq.members.begin() + i);
      if (vq.rr > i) vq.rr--;
      if (vq.rr >= vq.members.size()) vq.rr = 0;
      return;
    }
  }
}

void ConfuciusQdisc::recompute_queue_weight(int q) {
  int w = 0;
  for (FlowId id : queues_[q].members) w += flows_.at(id).weight_q128;
  queues_[q].weight = w;
}

void ConfuciusQdisc::arm_reclassify(SimTime at) {
  timers_->schedule(at, [this]() {
    SimTime now = timers_->now();
    reclassify(now);
    arm_reclassify(now + cfg_.reclassify_period_us);
  });
}

void ConfuciusQdisc::enqueue(Packet&& p, SimTime now) {
  if (!timers_) throw std::logic_error("confucius: timer service not attached");
  if (!reclassify_armed_) {
    reclassify_armed_ = true;
    arm_reclassify(now + cfg_.reclassify_period_us);
  }
  auto it = flows_.find(p.flow);
  FlowState& f = (it == flows_.end()) ? create_flow(p.flow, now) : it->second;
  p.enq_order = enq_order_++;
  f.queued_bytes += p.size;
  f.last_activity_us = now;
  queues_[f.queue].bytes += p.size;
  total_bytes_ += p.size;
  total_packets_++;
  n_enqueued_++;
  f.packets.push_back(std::move(p));
  if (total_bytes_ > buffer_limit_) drop_for_space(now);
}

void ConfuciusQdisc::drop_for_space(SimTime now) {
  while (total_bytes_ > buffer_limit_ && total_packets_ > 0) {
    // Victim: tail-most packet of the longest queue.
    int longest = 0;
    uint64_t best = 0;
    for (int q = 0; q < kNumQueues; q++) {
      if (queues_[q].bytes > best) {
        best = queues_[q].bytes;
        longest = q;
      }
    }
    FlowId victim = 0;
    uint64_t latest = 0;
    bool found = false;
    for (FlowId id : queues_[longest].members) {
      const FlowState& f = flows_.at(id);
      if (!f.packets.empty() && (!found || f.packets.back().enq_order >= latest)) {
        latest = f.packets.back().enq_order;
        victim = id;
        found = true;
      }
    }
    if (!found) return;  // inconsistent bookkeeping; refuse to loop
    FlowState& f = flows_.at(victim);
    Packet dropped = std::move(f.packets.back());
    f.packets.pop_back();
    f.queued_bytes -= dropped.size;
    queues_[longest].bytes -= dropped.size;
    total_bytes_ -= dropped.size;
    total_packets_--;
    n_dropped_++;
    report_drop(dropped, now);
  }
}

std::optional<Packet> ConfuciusQdisc::dequeue(SimTime now) {
  if (total_packets_ == 0) return std::nullopt;
  for (;;) {
    VirtualQueue& q = queues_[cursor_];
    if (q.bytes == 0) {
      q.deficit = 0;
      q.in_round = false;
      cursor_ = (cursor_ + 1) % kNumQueues;
      continue;
    }
    if (!q.in_round) {
      q.deficit += static_cast<int64_t>(cfg_.quantum_bytes) * q.weight / 128;
      q.in_round = true;
    }
    size_t n = q.members.size();
    bool budget_left = true;
    for (size_t visited = 0; visited < n; visited++) {
      FlowId id = q.members[q.rr];
      FlowState& f = flows_.at(id);
      if (f.packets.empty()) {
        f.deficit = 0;
        f.in_round = false;
        q.rr = (q.rr + 1) % n;
        continue;
      }
      if (!f.in_round) {
        f.deficit += cfg_.quantum_bytes;
        f.in_round = true;
      }
      uint32_t head = f.packets.front().size;
      if (q.deficit < head) {
        budget_left = false;
        break;
      }
      if (f.deficit < static_cast<int64_t>(head)) {
        f.in_round = false;
        q.rr = (q.rr + 1) % n;
        continue;
      }
      Packet p = std::move(f.packets.front());
      f.packets.pop_front();
      f.deficit -= head;
      q.deficit -= head;
      f.queued_bytes -= head;
      q.bytes -= head;
      total_bytes_ -= head;
      total_packets_--;
      n_dequeued_++;
      f.last_activity_us = now;
      sample_occupancy(static_cast<int>(cursor_), now);
      return p;
    }
    // Round over for this queue: out of byte budget, or every member
    // exhausted its own share.
    q.in_round = false;
    if (budget_left) {
      // All member deficits ran dry; their next visit replenishes them.
    }
    cursor_ = (cursor_ + 1) % kNumQueues;
  }
}

void ConfuciusQdisc::sample_occupancy(int q, SimTime now) {
  VirtualQueue& vq = queues_[q];
  if (vq.bytes == 0) return;
  const double half = static_cast<double>(cfg_.reclassify_period_us);
  for (FlowId id : vq.members) {
    FlowState& f = flows_.at(id);
    double share = static_cast<double>(f.queued_bytes) / static_cast<double>(vq.bytes);
    double decay = std::exp2(-static_cast<double>(now - f.ema_at_us) / half);
    f.ema = share + (f.ema - share) * decay;
    f.ema_at_us = now;
  }
}

void ConfuciusQdisc::reclassify(SimTime now) {
  // Flow-level pass: shares measured against the queue's fair split, moved
  // only outside the dead zone [1/n - alpha, 1/n + alpha].
  struct Decision {
    FlowId flow;
    int dir;
  };
  for (int q = 1; q < kNumQueues; q++) {
    VirtualQueue& vq = queues_[q];
    if (vq.members.size() < 2) continue;
    double sum = 0.0;
    for (FlowId id : vq.members) sum += flows_.at(id).ema;
    if (sum <= 0.0) continue;
    double fair = 1.0 / static_cast<double>(vq.members.size());
    std::vector<Decision> decisions;
    for (FlowId id : vq.members) {
      double share = flows_.at(id).ema / sum;
      if (share >= fair + cfg_.alpha && q < 3) {
        decisions.push_back({id, +1});
      } else if (share <= fair - cfg_.alpha && q > 1) {
        decisions.push_back({id, -1});
      }
    }
    for (const auto& d : decisions) {
      FlowState& f = flows_.at(d.flow);
      move_flow(f, q + d.dir, now, d.dir > 0 ? 'p' : 'd');
    }
  }

  // Queue-level pass: a whole queue migrates up when its occupancy crosses
  // the midpoint toward the next target for two consecutive periods.
  for (int q = 1; q <= 2; q++) {
    VirtualQueue& vq = queues_[q];
    double frac = static_cast<double>(vq.bytes) / static_cast<double>(buffer_limit_);
    double midpoint = 0.5 * (cfg_.occupancy_targets[q - 1] + cfg_.occupancy_targets[q]);
    if (!vq.members.empty() && frac >= midpoint) {
      vq.streak++;
    } else {
      vq.streak = 0;
    }
    if (vq.streak >= 2) {
      std::vector<FlowId> movers = vq.members;
      for (FlowId id : movers) move_flow(flows_.at(id), q + 1, now, 'q');
      vq.streak = 0;
    }
  }

  retire_idle(now);

  if (classify_log_enabled_) {
    for (const auto& [id, f] : flows_) {
      classify_log_.push_back({now, id, f.queue, f.weight_q128, f.ema});
    }
  }
}

void ConfuciusQdisc::retire_idle(SimTime now) {
  std::vector<FlowId> dead;
  for (const auto& [id, f] : flows_) {
    if (f.packets.empty() && now - f.last_activity_us >= cfg_.flow_idle_timeout_us) {
      dead.push_back(id);
    }
  }
  for (FlowId id : dead) {
    FlowState& f = flows_.at(id);
    timers_->cancel(f.reweight_timer);
    remove_member(f.queue, id);
    recompute_queue_weight(f.queue);
    flows_.erase(id);
  }
}

int ConfuciusQdisc::flow_queue(FlowId f) const {
  auto it = flows_.find(f);
  return it == flows_.end() ? -1 : it->second.queue;
}

int ConfuciusQdisc::flow_weight_q128(FlowId f) const {
  auto it = flows_.find(f);
  return it == flows_.end() ? -1 : it->second.weight_q128;
}

std::pair<int64_t, int64_t> ConfuciusQdisc::flow_initial_factor(FlowId f) const {
  auto it = flows_.find(f);
  if (it == flows_.end()) return {0, 0};
  return {it->second.factor_num, it->second.factor_den};
}

double ConfuciusQdisc::flow_occupancy_ema(FlowId f) const {
  auto it = flows_.find(f);
  return it == flows_.end() ? -1.0 : it->second.ema;
}

} // namespace confsim
