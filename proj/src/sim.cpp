#include "confsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

#include "confsim/baselines.hpp"
#include "confsim/event_queue.hpp"

namespace confsim {

namespace {

constexpr uint32_t kKeepAliveBytes = 64;
constexpr SimTime kMinRtoUs = 200'000;

// Retransmission trigger: a packet with three later transmissions already
// acknowledged is treated as lost.
constexpr uint64_t kDupAckGap = 3;

}  // namespace

std::vector<Packet> packetize_frame(FlowId flow, uint64_t seq_start,
                                    uint32_t frame_id, uint64_t bytes,
                                    SimTime gen_us, uint32_t mtu) {
  if (mtu == 0) throw std::invalid_argument("packetize_frame: mtu must be positive");
  uint32_t n = bytes == 0 ? 1 : static_cast<uint32_t>((bytes + mtu - 1) / mtu);
  std::vector<Packet> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; i++) {
    Packet p;
    p.flow = flow;
    p.seq = seq_start + i;
    uint64_t off = static_cast<uint64_t>(i) * mtu;
    p.size = bytes == 0 ? kKeepAliveBytes
                        : static_cast<uint32_t>(std::min<uint64_t>(mtu, bytes - off));
    p.sent_us = gen_us;
    p.frame_id = frame_id;
    p.frame_packets = n;
    p.frame_gen_us = gen_us;
    p.payload_off = off;
    p.payload_len = p.size;
    out.push_back(p);
  }
  return out;
}

uint64_t frame_bytes_at_rate(double rate_bps, int fps) {
  if (fps <= 0) throw std::invalid_argument("frame_bytes_at_rate: fps must be positive");
  if (rate_bps <= 0.0) return 0;
  return static_cast<uint64_t>(rate_bps / (8.0 * fps));
}

std::vector<SourceConfig> make_page_sources(const std::vector<uint64_t>& sizes,
                                            SimTime start_us, uint32_t page_id,
                                            const CcaConfig& cca) {
  if (sizes.empty()) throw std::invalid_argument("page must contain at least one flow");
  std::vector<SourceConfig> out;
  out.reserve(sizes.size());
  for (uint64_t sz : sizes) {
    if (sz == 0) throw std::invalid_argument("page flow sizes must be positive");
    SourceConfig s;
    s.kind = SourceKind::WEB;
    s.cca = cca;
    s.label = AppClass::WEB;
    s.start_us = start_us;
    s.size_bytes = sz;
    s.page_id = page_id;
    out.push_back(s);
  }
  return out;
}

struct Simulation::Impl {
  struct Hop {
    std::unique_ptr<Link> link;
    uint64_t admitted = 0;
    uint64_t delivered = 0;
    uint64_t dropped = 0;
  };

  struct OutPkt {
    uint64_t off;
    uint32_t len;
    uint32_t size;
    SimTime sent_us;
  };

  struct Sender {
    SourceConfig src;
    FlowId id = 0;
    std::unique_ptr<Cca> cca;
    SimTime rev_delay_us = 0;
    bool reliable = false;        // web/bulk retransmit; video never does
    uint64_t send_limit = 0;      // bytes to emit once each (UINT64_MAX: endless)

    double srtt_us = 0.0;
    SimTime last_progress_us = 0;
    EventQueue::Handle rto_h;
    bool rto_armed = false;

    uint64_t next_seq = 0;
    int64_t highest_acked = -1;
    std::map<uint64_t, OutPkt> outstanding;
    uint64_t inflight = 0;
    std::deque<std::pair<uint64_t, uint32_t>> retx;  // (payload_off, len)
    uint64_t next_off = 0;

    double pace_next = 0.0;
    bool pump_armed = false;

    SimTime loss_gate_us = 0;
    uint32_t next_frame = 0;
  };

  struct FrameProgress {
    size_t record;       // index into trace.frames
    uint32_t delivered = 0;
  };

  SimConfig cfg;
  EventQueue events;
  std::vector<Hop> hops;
  SimTime fwd_prop_total_us = 0;
  std::vector<Sender> senders;
  std::map<std::pair<FlowId, uint32_t>, FrameProgress> frame_prog;
  std::vector<std::set<uint64_t>> covered;  // per flow, payload offsets seen
  SimTrace trace;
  bool ran = false;

  explicit Impl(SimConfig c) : cfg(std::move(c)) {
    if (cfg.links.empty()) {
      throw std::invalid_argument("simulation needs at least one link");
    }
    if (cfg.duration_us < 0) {
      throw std::invalid_argument("duration must be non-negative");
    }
    for (const auto& l : cfg.links) fwd_prop_total_us += l.prop_one_way_us;

    hops.resize(cfg.links.size());
    for (size_t h = 0; h < cfg.links.size(); h++) {
      const LinkSpec& spec = cfg.links[h];
      uint64_t hop_seed = cfg.seed + 0x9E3779B97F4A7C15ULL * (h + 1);
      auto qd = make_qdisc(spec.scheduler, hop_seed, spec.confucius);
      uint64_t buf = spec.buffer_bytes;
      if (buf == 0) {
        // Twice the bandwidth-delay product at the profile's peak, with the
        // path's two-way propagation standing in for the RTT.
        SimTime path_rtt_us = 2 * fwd_prop_total_us;
        buf = static_cast<uint64_t>(spec.profile.peak()) * path_rtt_us / 4'000'000;
        buf = std::max<uint64_t>(buf, 2 * kMtuBytes);
      }
      qd->set_buffer_limit(buf);
      qd->set_drop_callback([this, h](const Packet& p, SimTime now) {
        hops[h].dropped++;
        trace.dropped_packets++;
        trace.drops.push_back({now, static_cast<int>(h), p.flow, p.seq, p.size});
      });
      if (auto* conf = dynamic_cast<ConfuciusQdisc*>(qd.get())) {
        conf->set_classify_log_enabled(true);
      }
      hops[h].link = std::make_unique<Link>(events, spec.profile,
                                            spec.prop_one_way_us, std::move(qd));
      hops[h].link->set_delivery_callback([this, h](Packet&& p, SimTime now) {
        hops[h].delivered++;
        if (h + 1 < hops.size()) {
          hops[h + 1].admitted++;
          hops[h + 1].link->enqueue(std::move(p));
        } else {
          receiver_arrival(std::move(p), now);
        }
      });
    }

    senders.resize(cfg.sources.size());
    covered.resize(cfg.sources.size());
    for (size_t i = 0; i < cfg.sources.size(); i++) {
      Sender& s = senders[i];
      s.src = cfg.sources[i];
      s.id = static_cast<FlowId>(i + 1);
      if (s.src.rtt_base_us < fwd_prop_total_us) {
        throw std::invalid_argument(
            "flow RTT smaller than the path's one-way propagation");
      }
      s.rev_delay_us = s.src.rtt_base_us - fwd_prop_total_us;
      switch (s.src.kind) {
        case SourceKind::VIDEO:
          if (s.src.fps <= 0) throw std::invalid_argument("video needs fps >= 1");
          s.send_limit = 0;
          break;
        case SourceKind::WEB:
          if (s.src.size_bytes == 0) {
            throw std::invalid_argument("web transfer needs a positive size");
          }
          s.reliable = true;
          s.send_limit = s.src.size_bytes;
          break;
        case SourceKind::BULK:
          s.reliable = true;
          s.send_limit = UINT64_MAX;
          break;
      }
      CcaConfig cc = s.src.cca;
      cc.rtt_guess_us = s.src.rtt_base_us;  // estimator seed = configured path RTT
      s.cca = make_cca(cc);
      s.srtt_us = static_cast<double>(s.src.rtt_base_us);

      FlowRecord fr;
      fr.flow = s.id;
      fr.kind = s.src.kind;
      fr.page_id = s.src.page_id;
      fr.start_us = s.src.start_us;
      fr.done_us = -1;
      fr.intended_bytes = s.src.kind == SourceKind::WEB ? s.src.size_bytes : 0;
      fr.delivered_bytes = 0;
      fr.cca = to_string(s.src.cca.kind);
      trace.flows.push_back(fr);
    }
  }

  SimTime rto_us(const Sender& s) const {
    return std::max<SimTime>(kMinRtoUs, static_cast<SimTime>(4.0 * s.srtt_us));
  }

  void admit(Packet&& p) {
    trace.enqueued_packets++;
    hops[0].admitted++;
    hops[0].link->enqueue(std::move(p));
  }

  void arm_rto(Sender& s) {
    if (s.rto_armed) {
      events.cancel(s.rto_h);
      s.rto_armed = false;
    }
    if (s.outstanding.empty()) return;
    SimTime at = std::max(events.now(), s.last_progress_us + rto_us(s));
    FlowId id = s.id;
    s.rto_h = events.schedule(at, [this, id] { on_rto(senders[id - 1]); });
    s.rto_armed = true;
  }

  void on_rto(Sender& s) {
    s.rto_armed = false;
    if (s.outstanding.empty()) return;
    SimTime now = events.now();
    SimTime due = s.last_progress_us + rto_us(s);
    if (now < due) {  // progress since this timer was set
      s.rto_h = events.schedule(due, [this, id = s.id] { on_rto(senders[id - 1]); });
      s.rto_armed = true;
      return;
    }
    for (const auto& [seq, pk] : s.outstanding) {
      if (s.reliable) s.retx.emplace_back(pk.off, pk.len);
    }
    s.outstanding.clear();
    s.inflight = 0;
    s.cca->on_loss(now);
    s.loss_gate_us = now + static_cast<SimTime>(s.srtt_us);
    s.last_progress_us = now;
    if (s.reliable) pump(s);
  }

  // Rate a frame-clocked source targets: pacing rate for rate controllers,
  // cwnd over the smoothed RTT for window controllers, whichever binds.
  double video_rate_bps(const Sender& s) const {
    double window_rate =
        static_cast<double>(s.cca->cwnd_bytes()) * 8e6 / std::max(s.srtt_us, 1.0);
    double r = std::min(s.cca->pacing_bps(), window_rate);
    return std::max(r, s.src.cca.floor_bps);
  }

  void emit_frame(Sender& s) {
    SimTime now = events.now();
    uint64_t bytes = frame_bytes_at_rate(video_rate_bps(s), s.src.fps);
    uint32_t frame_id = s.next_frame++;
    auto pkts = packetize_frame(s.id, s.next_seq, frame_id, bytes, now,
                                s.src.cca.mtu_bytes);
    s.next_seq += pkts.size();

    FrameRecord rec{s.id, frame_id, now, -1, static_cast<uint32_t>(pkts.size()), false};
    frame_prog[{s.id, frame_id}] = FrameProgress{trace.frames.size(), 0};
    trace.frames.push_back(rec);

    bool was_empty = s.outstanding.empty();
    for (auto& p : pkts) {
      p.app_class = s.src.label;
      s.outstanding[p.seq] = OutPkt{p.payload_off, p.payload_len, p.size, now};
      s.inflight += p.size;
      admit(std::move(p));
    }
    if (was_empty) s.last_progress_us = now;
    arm_rto(s);

    SimTime next =
        s.src.start_us + static_cast<SimTime>(static_cast<uint64_t>(s.next_frame) *
                                              1'000'000 / s.src.fps);
    events.schedule(next, [this, id = s.id] { emit_frame(senders[id - 1]); });
  }

  void pump(Sender& s) {
    SimTime now = events.now();
    while (true) {
      uint32_t len;
      if (!s.retx.empty()) {
        len = s.retx.front().second;
      } else if (s.next_off < s.send_limit) {
        len = static_cast<uint32_t>(
            std::min<uint64_t>(s.src.cca.mtu_bytes, s.send_limit - s.next_off));
      } else {
        return;  // nothing left to emit
      }
      if (s.inflight > 0 && s.inflight + len > s.cca->cwnd_bytes()) return;
      double now_d = static_cast<double>(now);
      if (now_d + 1e-9 < s.pace_next) {
        if (!s.pump_armed) {
          s.pump_armed = true;
          SimTime at = std::max<SimTime>(
              now + 1, static_cast<SimTime>(std::ceil(s.pace_next - 1e-9)));
          events.schedule(at, [this, id = s.id] {
            Sender& t = senders[id - 1];
            t.pump_armed = false;
            pump(t);
          });
        }
        return;
      }

      uint64_t off;
      if (!s.retx.empty()) {
        off = s.retx.front().first;
        s.retx.pop_front();
      } else {
        off = s.next_off;
        s.next_off += len;
      }
      Packet p;
      p.flow = s.id;
      p.size = len;
      p.seq = s.next_seq++;
      p.sent_us = now;
      p.app_class = s.src.label;
      p.payload_off = off;
      p.payload_len = len;
      bool was_empty = s.outstanding.empty();
      s.outstanding[p.seq] = OutPkt{off, len, len, now};
      s.inflight += len;
      admit(std::move(p));
      if (was_empty) s.last_progress_us = now;
      arm_rto(s);

      double rate = std::max(s.cca->pacing_bps(), 1.0);
      s.pace_next = std::max(now_d, s.pace_next) + len * 8e6 / rate;
    }
  }

  void receiver_arrival(Packet&& p, SimTime now) {
    trace.delivered_packets++;
    trace.deliveries.push_back({now, p.flow, p.seq, p.size, p.sent_us});
    FlowRecord& fr = trace.flows[p.flow - 1];

    if (p.frame_packets > 0) {
      fr.delivered_bytes += p.payload_len;
      auto it = frame_prog.find({p.flow, p.frame_id});
      if (it != frame_prog.end()) {
        FrameProgress& fp = it->second;
        fp.delivered++;
        FrameRecord& rec = trace.frames[fp.record];
        if (fp.delivered == rec.packets && !rec.complete) {
          rec.complete = true;
          rec.done_us = now;
        }
      }
    } else {
      // Count each payload byte range once; retransmissions may duplicate it.
      if (covered[p.flow - 1].insert(p.payload_off).second) {
        fr.delivered_bytes += p.payload_len;
        if (fr.intended_bytes > 0 && fr.delivered_bytes >= fr.intended_bytes &&
            fr.done_us < 0) {
          fr.done_us = now;
        }
      }
    }

    Sender& s = senders[p.flow - 1];
    SimTime ack_at = now + s.rev_delay_us;
    events.schedule(ack_at, [this, flow = p.flow, seq = p.seq, size = p.size,
                             sent = p.sent_us] { on_ack(flow, seq, size, sent); });
  }

  void on_ack(FlowId flow, uint64_t seq, uint32_t size, SimTime sent_us) {
    Sender& s = senders[flow - 1];
    SimTime now = events.now();
    SimTime rtt = now - sent_us;
    s.srtt_us = s.srtt_us * 0.875 + static_cast<double>(rtt) * 0.125;
    s.last_progress_us = now;

    auto it = s.outstanding.find(seq);
    if (it != s.outstanding.end()) {
      s.inflight -= std::min<uint64_t>(s.inflight, it->second.size);
      s.outstanding.erase(it);
    }
    s.highest_acked = std::max(s.highest_acked, static_cast<int64_t>(seq));
    s.cca->on_ack(now, rtt, size);

    // Everything the ack stream has skipped past is lost: queues preserve
    // per-flow order, so a later transmission arriving first means a drop.
    bool newly_lost = false;
    while (!s.outstanding.empty() &&
           s.outstanding.begin()->first + kDupAckGap <=
               static_cast<uint64_t>(s.highest_acked)) {
      const OutPkt& pk = s.outstanding.begin()->second;
      s.inflight -= std::min<uint64_t>(s.inflight, pk.size);
      if (s.reliable) s.retx.emplace_back(pk.off, pk.len);
      s.outstanding.erase(s.outstanding.begin());
      newly_lost = true;
    }
    if (newly_lost && now >= s.loss_gate_us) {
      s.cca->on_loss(now);
      s.loss_gate_us = now + static_cast<SimTime>(s.srtt_us);
    }
    arm_rto(s);
    if (s.reliable) pump(s);
  }

  void sample_queues() {
    SimTime now = events.now();
    for (size_t h = 0; h < hops.size(); h++) {
      trace.queue_samples.push_back(
          {now, static_cast<int>(h), hops[h].link->qdisc().queued_bytes()});
    }
    SimTime next = now + cfg.queue_sample_period_us;
    if (next <= cfg.duration_us) {
      events.schedule(next, [this] { sample_queues(); });
    }
  }

  SimTrace run() {
    if (ran) throw std::logic_error("a simulation instance runs once");
    ran = true;

    for (Sender& s : senders) {
      FlowId id = s.id;
      if (s.src.kind == SourceKind::VIDEO) {
        events.schedule(s.src.start_us, [this, id] { emit_frame(senders[id - 1]); });
      } else {
        events.schedule(s.src.start_us, [this, id] { pump(senders[id - 1]); });
      }
    }
    if (cfg.queue_sample_period_us > 0 &&
        cfg.queue_sample_period_us <= cfg.duration_us) {
      events.schedule(cfg.queue_sample_period_us, [this] { sample_queues(); });
    }

    events.run_until(cfg.duration_us);

    trace.duration_us = cfg.duration_us;
    int64_t residual = static_cast<int64_t>(trace.enqueued_packets) -
                       static_cast<int64_t>(trace.delivered_packets) -
                       static_cast<int64_t>(trace.dropped_packets);
    uint64_t queued = 0;
    for (const Hop& h : hops) queued += h.link->qdisc().queued_packets();
    if (residual < 0 || static_cast<uint64_t>(residual) < queued) {
      throw std::logic_error("packet conservation violated");
    }
    trace.residual_packets = static_cast<uint64_t>(residual);

    for (const Hop& h : hops) {
      if (auto* conf = dynamic_cast<ConfuciusQdisc*>(&h.link->qdisc())) {
        trace.moves = conf->moves();
        trace.classify = conf->classify_log();
        break;
      }
    }
    return std::move(trace);
  }
};

Simulation::Simulation(SimConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Simulation::~Simulation() = default;

SimTrace Simulation::run() { return impl_->run(); }

Qdisc& Simulation::qdisc(int link) {
  return impl_->hops.at(static_cast<size_t>(link)).link->qdisc();
}

} // namespace confsim
