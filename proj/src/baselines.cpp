#include "confsim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "confsim/confucius.hpp"

namespace confsim {

// ---------------------------------------------------------------- fifo

void FifoQdisc::enqueue(Packet&& p, SimTime now) {
  if (bytes_ + p.size > buffer_limit_) {
    report_drop(p, now);
    return;
  }
  bytes_ += p.size;
  q_.push_back(std::move(p));
}

std::optional<Packet> FifoQdisc::dequeue(SimTime) {
  if (q_.empty()) return std::nullopt;
  Packet p = std::move(q_.front());
  q_.pop_front();
  bytes_ -= p.size;
  return p;
}

// ---------------------------------------------------------------- fq

FqQdisc::Flow& FqQdisc::flow_of(FlowId id) {
  auto it = flows_.find(id);
  if (it == flows_.end()) {
    it = flows_.emplace(id, Flow{}).first;
    ring_.push_back(id);
  }
  return it->second;
}

void FqQdisc::enqueue(Packet&& p, SimTime now) {
  Flow& f = flow_of(p.flow);
  f.bytes += p.size;
  bytes_ += p.size;
  packets_++;
  f.q.push_back(std::move(p));
  while (bytes_ > buffer_limit_) drop_from_longest(now);
}

void FqQdisc::drop_from_longest(SimTime now) {
  FlowId victim = 0;
  uint64_t best = 0;
  for (const auto& [id, f] : flows_) {
    if (f.bytes > best) {
      best = f.bytes;
      victim = id;
    }
  }
  if (best == 0) return;
  Flow& f = flows_.at(victim);
  Packet dropped = std::move(f.q.back());
  f.q.pop_back();
  f.bytes -= dropped.size;
  bytes_ -= dropped.size;
  packets_--;
  report_drop(dropped, now);
}

std::optional<Packet> FqQdisc::dequeue(SimTime) {
  if (packets_ == 0) return std::nullopt;
  for (;;) {
    FlowId id = ring_[rr_];
    Flow& f = flows_.at(id);
    if (f.q.empty()) {
      f.deficit = 0;
      f.in_round = false;
      rr_ = (rr_ + 1) % ring_.size();
      continue;
    }
    if (!f.in_round) {
      f.deficit += quantum_;
      f.in_round = true;
    }
    uint32_t head = f.q.front().size;
    if (f.deficit < head) {
      f.in_round = false;
      rr_ = (rr_ + 1) % ring_.size();
      continue;
    }
    Packet p = std::move(f.q.front());
    f.q.pop_front();
    f.deficit -= head;
    f.bytes -= head;
    bytes_ -= head;
    packets_--;
    return p;
  }
}

// ---------------------------------------------------------------- codel

SimTime CodelQdisc::control_law(SimTime t, uint32_t count) {
  return t + static_cast<SimTime>(kIntervalUs / std::sqrt(static_cast<double>(count)));
}

void CodelQdisc::enqueue(Packet&& p, SimTime now) {
  if (bytes_ + p.size > buffer_limit_) {
    report_drop(p, now);
    return;
  }
  bytes_ += p.size;
  q_.push_back(std::move(p));
}

std::optional<Packet> CodelQdisc::pop_head(SimTime) {
  if (q_.empty()) return std::nullopt;
  Packet p = std::move(q_.front());
  q_.pop_front();
  bytes_ -= p.size;
  return p;
}

bool CodelQdisc::should_drop(const Packet& p, SimTime now) {
  SimTime sojourn = now - p.enqueued_us;
  if (sojourn < kTargetUs || bytes_ <= kMtuBytes) {
    st_.first_above = 0;
    return false;
  }
  if (st_.first_above == 0) {
    st_.first_above = now + kIntervalUs;
    return false;
  }
  return now >= st_.first_above;
}

std::optional<Packet> CodelQdisc::dequeue(SimTime now) {
  auto p = pop_head(now);
  if (!p) {
    st_.dropping = false;
    return std::nullopt;
  }
  bool drop_flag = should_drop(*p, now);
  if (st_.dropping) {
    if (!drop_flag) {
      st_.dropping = false;
    } else {
      while (st_.dropping && now >= st_.drop_next) {
        st_.count++;
        report_drop(*p, now);
        p = pop_head(now);
        if (!p) {
          st_.dropping = false;
          return std::nullopt;
        }
        if (!should_drop(*p, now)) {
          st_.dropping = false;
        } else {
          st_.drop_next = control_law(st_.drop_next, st_.count);
        }
      }
    }
  } else if (drop_flag) {
    report_drop(*p, now);
    p = pop_head(now);
    if (!p) return std::nullopt;
    st_.dropping = true;
    // Resume near the prior drop rate if we were dropping recently.
    uint32_t delta = st_.count - st_.lastcount;
    st_.count = (delta > 1 && now - st_.drop_next < 16 * kIntervalUs) ? delta : 1;
    st_.lastcount = st_.count;
    st_.drop_next = control_law(now, st_.count);
  }
  return p;
}

// ---------------------------------------------------------------- fq_codel

FqCodelQdisc::Flow& FqCodelQdisc::flow_of(FlowId id) {
  auto it = flows_.find(id);
  if (it == flows_.end()) {
    it = flows_.emplace(id, Flow{}).first;
    ring_.push_back(id);
  }
  return it->second;
}

void FqCodelQdisc::enqueue(Packet&& p, SimTime now) {
  Flow& f = flow_of(p.flow);
  f.bytes += p.size;
  bytes_ += p.size;
  packets_++;
  f.q.push_back(std::move(p));
  while (bytes_ > buffer_limit_) drop_from_longest(now);
}

void FqCodelQdisc::drop_from_longest(SimTime now) {
  FlowId victim = 0;
  uint64_t best = 0;
  for (const auto& [id, f] : flows_) {
    if (f.bytes > best) {
      best = f.bytes;
      victim = id;
    }
  }
  if (best == 0) return;
  Flow& f = flows_.at(victim);
  Packet dropped = std::move(f.q.back());
  f.q.pop_back();
  f.bytes -= dropped.size;
  bytes_ -= dropped.size;
  packets_--;
  report_drop(dropped, now);
}

std::optional<Packet> FqCodelQdisc::codel_pop(Flow& f, SimTime now) {
  auto& st = f.codel;
  auto pop = [&]() -> std::optional<Packet> {
    if (f.q.empty()) return std::nullopt;
    Packet p = std::move(f.q.front());
    f.q.pop_front();
    f.bytes -= p.size;
    bytes_ -= p.size;
    packets_--;
    return p;
  };
  auto over_target = [&](const Packet& p) {
    SimTime sojourn = now - p.enqueued_us;
    if (sojourn < CodelQdisc::kTargetUs || f.bytes <= kMtuBytes) {
      st.first_above = 0;
      return false;
    }
    if (st.first_above == 0) {
      st.first_above = now + CodelQdisc::kIntervalUs;
      return false;
    }
    return now >= st.first_above;
  };
  auto law = [](SimTime t, uint32_t count) {
    return t + static_cast<SimTime>(CodelQdisc::kIntervalUs / std::sqrt(static_cast<double>(count)));
  };

  auto p = pop();
  if (!p) {
    st.dropping = false;
    return std::nullopt;
  }
  bool bad = over_target(*p);
  if (st.dropping) {
    if (!bad) {
      st.dropping = false;
    } else {
      while (st.dropping && now >= st.drop_next) {
        st.count++;
        report_drop(*p, now);
        p = pop();
        if (!p) {
          st.dropping = false;
          return std::nullopt;
        }
        if (!over_target(*p)) {
          st.dropping = false;
        } else {
          st.drop_next = law(st.drop_next, st.count);
        }
      }
    }
  } else if (bad) {
    report_drop(*p, now);
    p = pop();
    if (!p) return std::nullopt;
    st.dropping = true;
    uint32_t delta = st.count - st.lastcount;
    st.count = (delta > 1 && now - st.drop_next < 16 * CodelQdisc::kIntervalUs) ? delta : 1;
    st.lastcount = st.count;
    st.drop_next = law(now, st.count);
  }
  return p;
}

std::optional<Packet> FqCodelQdisc::dequeue(SimTime now) {
  for (;;) {
    if (packets_ == 0) return std::nullopt;
    FlowId id = ring_[rr_];
    Flow& f = flows_.at(id);
    if (f.q.empty()) {
      f.deficit = 0;
      f.in_round = false;
      rr_ = (rr_ + 1) % ring_.size();
      continue;
    }
    if (!f.in_round) {
      f.deficit += quantum_;
      f.in_round = true;
    }
    uint32_t head = f.q.front().size;
    if (f.deficit < head) {
      f.in_round = false;
      rr_ = (rr_ + 1) % ring_.size();
      continue;
    }
    auto p = codel_pop(f, now);
    if (!p) continue;
    f.deficit -= p->size;
    return p;
  }
}

// ---------------------------------------------------------------- red

RedQdisc::RedQdisc(uint64_t seed) : rng_(seed) {}

void RedQdisc::enqueue(Packet&& p, SimTime now) {
  avg_ = (1.0 - kWeight) * avg_ + kWeight * static_cast<double>(bytes_);
  bool drop = false;
  if (bytes_ + p.size > buffer_limit_) {
    drop = true;
  } else if (avg_ >= kMaxBytes) {
    drop = true;
  } else if (avg_ > kMinBytes) {
    double pdrop = kPMax * (avg_ - kMinBytes) / (kMaxBytes - kMinBytes);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    drop = u(rng_) < pdrop;
  }
  if (drop) {
    report_drop(p, now);
    return;
  }
  bytes_ += p.size;
  q_.push_back(std::move(p));
}

std::optional<Packet> RedQdisc::dequeue(SimTime) {
  if (q_.empty()) return std::nullopt;
  Packet p = std::move(q_.front());
  q_.pop_front();
  bytes_ -= p.size;
  return p;
}

// ---------------------------------------------------------------- sjf (least attained service)

int SjfQdisc::flow_level(FlowId id) const {
  auto it = flows_.find(id);
  return it == flows_.end() ? -1 : it->second.level;
}

void SjfQdisc::enqueue(Packet&& p, SimTime now) {
  auto it = flows_.find(p.flow);
  if (it == flows_.end()) it = flows_.emplace(p.flow, Flow{}).first;
  Flow& f = it->second;
  f.bytes += p.size;
  bytes_ += p.size;
  packets_++;
  FlowId id = p.flow;
  f.q.push_back(std::move(p));
  // Flows drop out of their ring when found empty; a resuming flow must be
  // re-homed or its packets become unreachable.
  if (!f.in_ring) {
    rings_[f.level].push_back(id);
    f.in_ring = true;
  }
  while (bytes_ > buffer_limit_) drop_from_longest(now);
}

void SjfQdisc::drop_from_longest(SimTime now) {
  FlowId victim = 0;
  uint64_t best = 0;
  for (const auto& [id, f] : flows_) {
    if (f.bytes > best) {
      best = f.bytes;
      victim = id;
    }
  }
  if (best == 0) return;
  Flow& f = flows_.at(victim);
  Packet dropped = std::move(f.q.back());
  f.q.pop_back();
  f.bytes -= dropped.size;
  bytes_ -= dropped.size;
  packets_--;
  report_drop(dropped, now);
}

std::optional<Packet> SjfQdisc::dequeue(SimTime) {
  if (packets_ == 0) return std::nullopt;
  for (int lvl = 0; lvl < 4; lvl++) {
    auto& ring = rings_[lvl];
    // Every pass either serves (returns) or erases a stale entry, so this
    // terminates; a fixed trip count would give up mid-sweep and stall.
    while (!ring.empty()) {
      if (rr_[lvl] >= ring.size()) rr_[lvl] = 0;
      FlowId id = ring[rr_[lvl]];
      Flow& f = flows_.at(id);
      if (f.level != lvl || f.q.empty()) {
        ring.erase(ring.begin() + rr_[lvl]);
        if (f.level != lvl && !f.q.empty()) {
          rings_[f.level].push_back(id);
        } else {
          f.in_ring = false;
        }
        continue;
      }
      Packet p = std::move(f.q.front());
      f.q.pop_front();
      f.bytes -= p.size;
      f.attained += p.size;
      bytes_ -= p.size;
      packets_--;
      while (f.level < 3 && f.attained >= kThresholds[f.level]) f.level++;
      rr_[lvl] = ring.empty() ? 0 : (rr_[lvl] + 1) % ring.size();
      return p;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- cbq

CbqQdisc::CbqQdisc(int w_realtime, int w_web) : w_rt_(w_realtime), w_web_(w_web) {
  cls_[0].weight = w_realtime;
  cls_[1].weight = w_web;
}

std::string CbqQdisc::name() const {
  return "cbq_" + std::to_string(w_rt_) + "_" + std::to_string(w_web_);
}

void CbqQdisc::enqueue(Packet&& p, SimTime now) {
  size_t c = (p.app_class && *p.app_class == AppClass::REALTIME) ? 0 : 1;
  Class& cl = cls_[c];
  auto it = cl.flows.find(p.flow);
  if (it == cl.flows.end()) {
    it = cl.flows.emplace(p.flow, Flow{}).first;
    cl.ring.push_back(p.flow);
  }
  Flow& f = it->second;
  f.bytes += p.size;
  cl.bytes += p.size;
  bytes_ += p.size;
  packets_++;
  f.q.push_back(std::move(p));
  while (bytes_ > buffer_limit_) drop_from_longest(now);
}

void CbqQdisc::drop_from_longest(SimTime now) {
  Class* cl = nullptr;
  Flow* victim = nullptr;
  uint64_t best = 0;
  for (auto& c : cls_) {
    for (auto& [id, f] : c.flows) {
      if (f.bytes > best) {
        best = f.bytes;
        victim = &f;
        cl = &c;
      }
    }
  }
  if (!victim) return;
  Packet dropped = std::move(victim->q.back());
  victim->q.pop_back();
  victim->bytes -= dropped.size;
  cl->bytes -= dropped.size;
  bytes_ -= dropped.size;
  packets_--;
  report_drop(dropped, now);
}

std::optional<Packet> CbqQdisc::class_pop(Class& c) {
  // Caller guarantees c.bytes > 0. A flow that spent its deficit needs a
  // second lap to be re-credited, so the scan must not stop after one cycle.
  for (;;) {
    FlowId id = c.ring[c.rr];
    Flow& f = c.flows.at(id);
    if (f.q.empty()) {
      f.deficit = 0;
      f.in_round = false;
      c.rr = (c.rr + 1) % c.ring.size();
      continue;
    }
    if (!f.in_round) {
      f.deficit += kMtuBytes;
      f.in_round = true;
    }
    uint32_t head = f.q.front().size;
    if (f.deficit < head) {
      f.in_round = false;
      c.rr = (c.rr + 1) % c.ring.size();
      continue;
    }
    Packet p = std::move(f.q.front());
    f.q.pop_front();
    f.deficit -= head;
    f.bytes -= head;
    c.bytes -= head;
    return p;
  }
  return std::nullopt;
}

std::optional<Packet> CbqQdisc::dequeue(SimTime) {
  if (packets_ == 0) return std::nullopt;
  for (;;) {
    Class& c = cls_[cursor_];
    if (c.bytes == 0) {
      c.deficit = 0;
      c.in_round = false;
      cursor_ ^= 1;
      continue;
    }
    if (!c.in_round) {
      c.deficit += static_cast<int64_t>(kMtuBytes) * c.weight;
      c.in_round = true;
    }
    uint32_t head = 0;
    for (FlowId id : c.ring) {
      const Flow& f = c.flows.at(id);
      if (!f.q.empty()) {
        head = f.q.front().size;
        break;
      }
    }
    if (c.deficit < head) {
      c.in_round = false;
      cursor_ ^= 1;
      continue;
    }
    auto p = class_pop(c);
    if (!p) {
      c.in_round = false;
      cursor_ ^= 1;
      continue;
    }
    c.deficit -= p->size;
    bytes_ -= p->size;
    packets_--;
    return p;
  }
}

// ---------------------------------------------------------------- strict

void StrictQdisc::enqueue(Packet&& p, SimTime now) {
  if (bytes_ + p.size > buffer_limit_) {
    report_drop(p, now);
    return;
  }
  bytes_ += p.size;
  packets_++;
  bool rt = p.app_class && *p.app_class == AppClass::REALTIME;
  (rt ? rt_ : web_).push_back(std::move(p));
}

std::optional<Packet> StrictQdisc::dequeue(SimTime) {
  std::deque<Packet>* q = !rt_.empty() ? &rt_ : (!web_.empty() ? &web_ : nullptr);
  if (!q) return std::nullopt;
  Packet p = std::move(q->front());
  q->pop_front();
  bytes_ -= p.size;
  packets_--;
  return p;
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Qdisc> make_qdisc(const std::string& name, uint64_t seed,
                                  const ConfuciusConfig& ccfg) {
  if (name == "fifo") return std::make_unique<FifoQdisc>();
  if (name == "fq") return std::make_unique<FqQdisc>();
  if (name == "fq_codel") return std::make_unique<FqCodelQdisc>();
  if (name == "codel") return std::make_unique<CodelQdisc>();
  if (name == "red") return std::make_unique<RedQdisc>(seed);
  if (name == "sjf") return std::make_unique<SjfQdisc>();
  if (name == "cbq_1_1") return std::make_unique<CbqQdisc>(1, 1);
  if (name == "cbq_1_5") return std::make_unique<CbqQdisc>(1, 5);
  if (name == "strict") return std::make_unique<StrictQdisc>();
  if (name == "confucius") return std::make_unique<ConfuciusQdisc>(ccfg);
  throw std::invalid_argument("unknown scheduler: " + name);
}

} // namespace confsim
