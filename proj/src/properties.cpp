#include "confsim/properties.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "confsim/baselines.hpp"
#include "confsim/confucius.hpp"

namespace confsim {

namespace {

struct Rng {
  std::mt19937_64 g;
  explicit Rng(uint64_t seed) : g(seed) {}
  uint64_t pick(uint64_t lo, uint64_t hi) {  // inclusive
    return lo + g() % (hi - lo + 1);
  }
  double unit() { return static_cast<double>(g() >> 11) * 0x1p-53; }
};

Packet make_packet(FlowId flow, uint64_t seq, uint32_t size, SimTime now) {
  Packet p;
  p.flow = flow;
  p.size = size;
  p.seq = seq;
  p.sent_us = now;
  p.enqueued_us = now;
  return p;
}

struct ConfuciusHarness {
  EventQueue eq;
  TimerService timers{eq};
  ConfuciusQdisc q;
  std::map<FlowId, uint64_t> next_seq;

  explicit ConfuciusHarness(ConfuciusConfig cfg = {}) : q(cfg) {
    q.attach_timers(&timers);
    q.set_buffer_limit(100'000'000);  // structure under test, not drops
  }

  void put(FlowId f, uint32_t size) {
    q.enqueue(make_packet(f, next_seq[f]++, size, eq.now()), eq.now());
  }

  // Arrivals sharing a timestamp get their weights settled by a same-instant
  // event; run it before inspecting weights or draining.
  void settle() { eq.run_until(eq.now()); }
};

const char* kAllSchedulers[] = {"fifo",    "fq",      "fq_codel", "codel",
                                "red",     "sjf",     "cbq_1_1",  "cbq_1_5",
                                "strict",  "confucius"};

// ---- Suite 1: per-flow dequeue order matches enqueue order ----------------

bool case_flow_order(uint64_t seed, std::string& why) {
  Rng rng(seed);
  ConfuciusHarness h;
  int flows = static_cast<int>(rng.pick(2, 6));
  std::map<FlowId, uint64_t> expect_next;
  int ops = static_cast<int>(rng.pick(60, 200));
  for (int i = 0; i < ops; i++) {
    int action = static_cast<int>(rng.pick(0, 9));
    if (action < 5) {
      h.put(static_cast<FlowId>(rng.pick(1, flows)),
            static_cast<uint32_t>(rng.pick(200, 1500)));
    } else if (action < 8) {
      auto p = h.q.dequeue(h.eq.now());
      if (p) {
        uint64_t want = expect_next[p->flow]++;
        if (p->seq != want) {
          std::ostringstream os;
          os << "flow " << p->flow << " yielded seq " << p->seq
             << ", expected " << want;
          why = os.str();
          return false;
        }
      }
    } else if (action == 8) {
      h.eq.run_until(h.eq.now() + rng.pick(1'000, 400'000));
    } else {
      h.q.force_reclassify(h.eq.now());
    }
  }
  while (auto p = h.q.dequeue(h.eq.now())) {
    uint64_t want = expect_next[p->flow]++;
    if (p->seq != want) {
      why = "tail drain broke per-flow order";
      return false;
    }
  }
  return true;
}

// ---- Suite 2: weights only double, and graduation is exact ----------------

bool case_weight_monotone(uint64_t seed, std::string& why) {
  Rng rng(seed);
  ConfuciusHarness h;
  int k = static_cast<int>(rng.pick(2, 16));
  for (int f = 1; f <= k; f++)
    for (int j = 0; j < 3; j++) h.put(static_cast<FlowId>(f), 1'000);
  h.settle();

  FlowId watch = static_cast<FlowId>(rng.pick(1, k));
  int w0 = std::clamp(static_cast<int>(std::lround(128.0 / k)), 1, 128);
  if (h.q.flow_weight_q128(watch) != w0) {
    std::ostringstream os;
    os << "cohort of " << k << " started at " << h.q.flow_weight_q128(watch)
       << ", expected " << w0;
    why = os.str();
    return false;
  }
  if (h.q.flow_initial_factor(watch) != std::pair<int64_t, int64_t>{1, k}) {
    why = "initial factor is not 1 over the cohort size";
    return false;
  }
  int w = w0;
  bool graduated = false;
  SimTime t = 0;
  for (int step = 0; step < 60 && !graduated; step++) {
    t += rng.pick(50'000, 400'000);
    h.eq.run_until(t);
    int now_w = h.q.flow_weight_q128(watch);
    if (now_w < w) {
      why = "weight decreased";
      return false;
    }
    // Every observed value must be w0 shifted left some number of times,
    // saturating at full weight.
    int probe = w;
    while (probe < now_w) probe = std::min(probe * 2, 128);
    if (probe != now_w) {
      std::ostringstream os;
      os << "weight " << now_w << " is not a doubling of " << w;
      why = os.str();
      return false;
    }
    w = now_w;
    if (h.q.flow_queue(watch) != ConfuciusQdisc::kNew) {
      graduated = true;
      if (now_w != 128) {
        why = "graduated below full weight";
        return false;
      }
    }
  }
  if (!graduated) {
    why = "still probational after every doubling period elapsed";
    return false;
  }
  bool saw_grad_move = false;
  for (const auto& m : h.q.moves())
    if (m.flow == watch && m.reason == 'g') saw_grad_move = true;
  if (!saw_grad_move) {
    why = "no graduation move recorded";
    return false;
  }
  return true;
}

// ---- Suite 3: queue membership partitions the live flows ------------------

bool partition_ok(const ConfuciusQdisc& q, std::string& why) {
  std::set<FlowId> seen;
  uint64_t member_bytes = 0;
  for (int i = 0; i < ConfuciusQdisc::kNumQueues; i++) {
    for (FlowId f : q.queue_members(i)) {
      if (!seen.insert(f).second) {
        why = "flow appears in two queues";
        return false;
      }
      if (!q.has_flow(f) || q.flow_queue(f) != i) {
        why = "membership and flow record disagree";
        return false;
      }
    }
    member_bytes += q.queue_bytes_of(i);
  }
  if (member_bytes != q.queued_bytes()) {
    why = "per-queue byte counts do not sum to the total";
    return false;
  }
  return true;
}

bool case_partition(uint64_t seed, std::string& why) {
  Rng rng(seed);
  ConfuciusHarness h;
  int flows = static_cast<int>(rng.pick(2, 8));
  int ops = static_cast<int>(rng.pick(40, 150));
  for (int i = 0; i < ops; i++) {
    int action = static_cast<int>(rng.pick(0, 9));
    if (action < 5) {
      FlowId f = static_cast<FlowId>(rng.pick(1, flows));
      h.put(f, static_cast<uint32_t>(rng.pick(200, 1500)));
      int where = h.q.flow_queue(f);
      if (where < 0) {
        why = "enqueued flow has no queue";
        return false;
      }
      auto members = h.q.queue_members(where);
      if (std::find(members.begin(), members.end(), f) == members.end()) {
        why = "enqueued flow missing from its queue's member list";
        return false;
      }
    } else if (action < 7) {
      h.q.dequeue(h.eq.now());
    } else if (action < 9) {
      h.eq.run_until(h.eq.now() + rng.pick(1'000, 500'000));
    } else {
      h.q.force_reclassify(h.eq.now());
    }
    if (!partition_ok(h.q, why)) return false;
  }
  return true;
}

// ---- Suites 4 and 5: work and packet conservation over every scheduler ----

bool case_conservation(uint64_t seed, std::string& why, bool work_check) {
  Rng rng(seed);
  EventQueue eq;
  TimerService timers{eq};
  const char* name =
      kAllSchedulers[rng.pick(0, std::size(kAllSchedulers) - 1)];
  auto q = make_qdisc(name, seed, ConfuciusConfig{});
  q->attach_timers(&timers);
  q->set_buffer_limit(rng.pick(5'000, 100'000));

  uint64_t dropped = 0;
  q->set_drop_callback([&](const Packet&, SimTime) { dropped++; });

  uint64_t enqueued = 0, dequeued = 0;
  std::map<FlowId, uint64_t> seq;
  int flows = static_cast<int>(rng.pick(1, 6));
  int ops = static_cast<int>(rng.pick(50, 250));
  for (int i = 0; i < ops; i++) {
    int action = static_cast<int>(rng.pick(0, 9));
    if (action < 6) {
      FlowId f = static_cast<FlowId>(rng.pick(1, flows));
      Packet p = make_packet(f, seq[f]++,
                             static_cast<uint32_t>(rng.pick(200, 1500)),
                             eq.now());
      if (rng.pick(0, 3) == 0) {
        p.app_class = rng.pick(0, 1) ? AppClass::WEB : AppClass::REALTIME;
      }
      q->enqueue(std::move(p), eq.now());
      enqueued++;
    } else if (action < 9) {
      auto p = q->dequeue(eq.now());
      if (p) {
        dequeued++;
      } else if (work_check && q->queued_packets() != 0) {
        why = std::string(name) + ": dequeue refused with backlog present";
        return false;
      }
    } else {
      eq.run_until(eq.now() + rng.pick(1'000, 200'000));
    }
    if (!work_check && enqueued != dequeued + dropped + q->queued_packets()) {
      std::ostringstream os;
      os << name << ": " << enqueued << " in != " << dequeued << " out + "
         << dropped << " dropped + " << q->queued_packets() << " queued";
      why = os.str();
      return false;
    }
  }
  // Full drain: every dequeue must make progress until the backlog is gone.
  while (q->queued_packets() > 0) {
    size_t before = q->queued_packets();
    auto p = q->dequeue(eq.now());
    if (p) dequeued++;
    if (q->queued_packets() >= before) {
      why = std::string(name) + ": drain made no progress";
      return false;
    }
  }
  if (!work_check && enqueued != dequeued + dropped) {
    why = std::string(name) + ": post-drain counts do not balance";
    return false;
  }
  return true;
}

bool case_work_conservation(uint64_t seed, std::string& why) {
  return case_conservation(seed, why, true);
}

bool case_packet_conservation(uint64_t seed, std::string& why) {
  return case_conservation(seed, why, false);
}

// ---- Suite 6: the reclassification dead zone really is dead ---------------

bool case_hysteresis(uint64_t seed, std::string& why) {
  Rng rng(seed);
  ConfuciusConfig cfg;
  ConfuciusHarness h(cfg);
  int n = static_cast<int>(rng.pick(4, 7));  // all graduate into the low queue
  for (int f = 1; f <= n; f++)
    for (int j = 0; j < 20; j++) h.put(static_cast<FlowId>(f), 1'000);

  // Let every flow double to full weight and graduate.
  h.eq.run_until(3'000'000);
  for (int f = 1; f <= n; f++) {
    if (h.q.flow_queue(static_cast<FlowId>(f)) == ConfuciusQdisc::kNew) {
      why = "setup: flow failed to graduate";
      return false;
    }
  }
  int home = h.q.flow_queue(1);

  // Drain at one timestamp. The first dequeue pins every member's occupancy
  // average at the equal split; zero-elapsed samples after it change nothing.
  while (h.q.dequeue(h.eq.now())) {
  }

  // Rebuild the backlog with controlled shares. In-band cases stay well
  // inside fair +- alpha; out-of-band cases push one flow past fair + alpha.
  bool out_of_band = rng.pick(0, 4) == 0;
  double fair = 1.0 / n;
  std::vector<double> share(static_cast<size_t>(n), fair);
  if (out_of_band) {
    double bump = cfg.alpha + 0.02 + 0.10 * rng.unit();
    share[0] = fair + bump;
    for (int i = 1; i < n; i++) share[i] = (1.0 - share[0]) / (n - 1);
  } else {
    double spread = 0.0;
    for (int i = 0; i < n; i++) {
      double d = (rng.unit() - 0.5) * cfg.alpha * 0.6;
      share[i] = fair + d;
      spread += d;
    }
    for (int i = 0; i < n; i++) share[i] -= spread / n;  // keep the sum at 1
  }
  const double total = 400'000.0;
  h.eq.run_until(3'200'000);
  for (int f = 1; f <= n; f++) {
    auto bytes = static_cast<uint64_t>(total * share[f - 1]);
    uint64_t put = 0;
    while (put < bytes) {
      auto sz = static_cast<uint32_t>(std::min<uint64_t>(1'000, bytes - put));
      if (sz < 200) sz = 200;
      h.put(static_cast<FlowId>(f), sz);
      put += sz;
    }
  }

  // One aged dequeue snaps every member's average onto its current share.
  h.eq.run_until(4'000'000);
  h.q.dequeue(h.eq.now());

  size_t moves_before = h.q.moves().size();
  h.q.force_reclassify(h.eq.now());
  h.q.force_reclassify(h.eq.now() + cfg.reclassify_period_us);

  size_t flow_moves = 0;
  for (size_t i = moves_before; i < h.q.moves().size(); i++) {
    char r = h.q.moves()[i].reason;
    if (r == 'p' || r == 'd') flow_moves++;
  }
  if (out_of_band) {
    if (flow_moves == 0) {
      why = "share beyond the band produced no move";
      return false;
    }
    if (home < 3 && h.q.flow_queue(1) <= home) {
      why = "overweight flow was not promoted";
      return false;
    }
  } else if (flow_moves != 0) {
    std::ostringstream os;
    os << flow_moves << " moves despite every share inside the dead zone";
    why = os.str();
    return false;
  }
  return true;
}

// ---- Suite 7: DWRR serves bytes in weight proportion -----------------------

bool case_dwrr_ratio(uint64_t seed, std::string& why) {
  Rng rng(seed);
  ConfuciusConfig cfg;
  ConfuciusHarness h(cfg);

  // One settled flow, then a cohort arriving together. The cohort's queue
  // carries roughly the settled queue's aggregate weight, so service splits
  // between the two queues by weight while the cohort splits its half evenly.
  const FlowId settled = 1;
  for (int j = 0; j < 400; j++) h.put(settled, 1'000);
  h.eq.run_until(3'000'000);
  if (h.q.flow_queue(settled) == ConfuciusQdisc::kNew) {
    why = "setup: settled flow still probational";
    return false;
  }

  int k = static_cast<int>(rng.pick(2, 8));
  for (int f = 2; f < 2 + k; f++)
    for (int j = 0; j < 400; j++) h.put(static_cast<FlowId>(f), 1'000);
  h.settle();

  int w_settled = h.q.queue_weight_of(h.q.flow_queue(settled));
  int w_cohort = h.q.queue_weight_of(ConfuciusQdisc::kNew);
  if (w_settled != 128 || w_cohort < 100) {
    why = "setup: unexpected queue weights";
    return false;
  }

  // Saturated drain with time frozen: no doublings, no examinations.
  uint64_t drained = 0;
  std::map<FlowId, uint64_t> served;
  const uint64_t target = 300'000;
  while (drained < target) {
    auto p = h.q.dequeue(h.eq.now());
    if (!p) {
      why = "drain starved while every flow was backlogged";
      return false;
    }
    served[p->flow] += p->size;
    drained += p->size;
  }

  uint64_t cohort = 0, lo = UINT64_MAX, hi = 0;
  for (int f = 2; f < 2 + k; f++) {
    uint64_t b = served[static_cast<FlowId>(f)];
    cohort += b;
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }
  // Queue level: service tracks the weight split up to round granularity.
  double expect_settled =
      static_cast<double>(drained) * w_settled / (w_settled + w_cohort);
  double queue_slack = 2.0 * cfg.quantum_bytes + 3'000.0;
  if (std::fabs(static_cast<double>(served[settled]) - expect_settled) >
      queue_slack) {
    std::ostringstream os;
    os << "settled flow served " << served[settled] << ", expected "
       << expect_settled << " of " << drained;
    why = os.str();
    return false;
  }
  // Flow level inside the cohort: equal weights, equal service.
  if (hi - lo > cfg.quantum_bytes + 3'000) {
    std::ostringstream os;
    os << "cohort spread " << hi - lo << " exceeds a round of slack";
    why = os.str();
    return false;
  }
  return true;
}

PropertyResult run_suite(const std::string& name, int cases, uint64_t seed,
                         bool (*fn)(uint64_t, std::string&)) {
  PropertyResult r;
  r.name = name;
  r.cases = cases;
  for (int i = 0; i < cases; i++) {
    std::string why;
    if (!fn(seed * 1'000'003ull + static_cast<uint64_t>(i), why)) {
      r.failures++;
      if (r.first_failure.empty()) {
        r.first_failure = "case " + std::to_string(i) + ": " + why;
      }
    }
  }
  return r;
}

}  // namespace

std::vector<PropertyResult> run_property_suites(int cases_per_suite,
                                                uint64_t seed) {
  return {
      run_suite("per_flow_order", cases_per_suite, seed + 1, case_flow_order),
      run_suite("weight_monotonicity", cases_per_suite, seed + 2,
                case_weight_monotone),
      run_suite("queue_partition", cases_per_suite, seed + 3, case_partition),
      run_suite("work_conservation", cases_per_suite, seed + 4,
                case_work_conservation),
      run_suite("packet_conservation", cases_per_suite, seed + 5,
                case_packet_conservation),
      run_suite("hysteresis_dead_zone", cases_per_suite, seed + 6,
                case_hysteresis),
      run_suite("dwrr_byte_ratio", cases_per_suite, seed + 7, case_dwrr_ratio),
  };
}

}  // namespace confsim
