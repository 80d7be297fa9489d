#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <map>
#include <vector>

#include "confsim/sim.hpp"

using namespace confsim;

namespace {

SimConfig one_link(uint64_t bps, SimTime prop_us = 20'000,
                   const std::string& sched = "fifo") {
  SimConfig cfg;
  LinkSpec l;
  l.profile = CapacityProfile::constant(bps);
  l.prop_one_way_us = prop_us;
  l.scheduler = sched;
  cfg.links.push_back(l);
  return cfg;
}

SourceConfig web_flow(uint64_t bytes, SimTime start_us = 0,
                      SimTime rtt_us = 40'000) {
  SourceConfig s;
  s.kind = SourceKind::WEB;
  s.cca.kind = CcaKind::CUBIC_LIKE;
  s.size_bytes = bytes;
  s.start_us = start_us;
  s.rtt_base_us = rtt_us;
  return s;
}

SourceConfig video_flow(CcaKind cca, SimTime rtt_us = 40'000, int fps = 30) {
  SourceConfig s;
  s.kind = SourceKind::VIDEO;
  s.cca.kind = cca;
  s.fps = fps;
  s.rtt_base_us = rtt_us;
  return s;
}

bool same_trace(const SimTrace& a, const SimTrace& b) {
  if (a.deliveries.size() != b.deliveries.size()) return false;
  for (size_t i = 0; i < a.deliveries.size(); i++) {
    const auto &x = a.deliveries[i], &y = b.deliveries[i];
    if (x.at_us != y.at_us || x.flow != y.flow || x.seq != y.seq ||
        x.size != y.size || x.sent_us != y.sent_us)
      return false;
  }
  if (a.drops.size() != b.drops.size()) return false;
  for (size_t i = 0; i < a.drops.size(); i++) {
    const auto &x = a.drops[i], &y = b.drops[i];
    if (x.at_us != y.at_us || x.link != y.link || x.flow != y.flow ||
        x.seq != y.seq)
      return false;
  }
  if (a.queue_samples.size() != b.queue_samples.size()) return false;
  for (size_t i = 0; i < a.queue_samples.size(); i++) {
    const auto &x = a.queue_samples[i], &y = b.queue_samples[i];
    if (x.at_us != y.at_us || x.link != y.link || x.bytes != y.bytes)
      return false;
  }
  if (a.frames.size() != b.frames.size()) return false;
  for (size_t i = 0; i < a.frames.size(); i++) {
    const auto &x = a.frames[i], &y = b.frames[i];
    if (x.flow != y.flow || x.frame_id != y.frame_id || x.gen_us != y.gen_us ||
        x.done_us != y.done_us || x.packets != y.packets ||
        x.complete != y.complete)
      return false;
  }
  return a.enqueued_packets == b.enqueued_packets &&
         a.delivered_packets == b.delivered_packets &&
         a.dropped_packets == b.dropped_packets &&
         a.residual_packets == b.residual_packets;
}

}  // namespace

TEST_CASE("frame packetization splits on the mtu and keeps one frame identity") {
  auto pkts = packetize_frame(7, 100, 3, 25'000, 1'000);
  REQUIRE(pkts.size() == 17);  // 6 Mbps / 30 fps / 8 = 25000 B
  uint64_t total = 0;
  for (size_t i = 0; i < pkts.size(); i++) {
    CHECK(pkts[i].flow == 7);
    CHECK(pkts[i].seq == 100 + i);
    CHECK(pkts[i].frame_id == 3);
    CHECK(pkts[i].frame_packets == 17);
    CHECK(pkts[i].frame_gen_us == 1'000);
    CHECK(pkts[i].payload_off == i * 1500);
    total += pkts[i].size;
  }
  CHECK(pkts.back().size == 1'000);  // remainder rides in the last packet
  CHECK(total == 25'000);
}

TEST_CASE("zero-byte frame still emits one keep-alive packet") {
  auto pkts = packetize_frame(1, 0, 0, 0, 0);
  REQUIRE(pkts.size() == 1);
  CHECK(pkts[0].size > 0);
  CHECK(pkts[0].size < kMtuBytes);
  CHECK(pkts[0].frame_packets == 1);
}

TEST_CASE("frame payload tracks the rate and the fps") {
  CHECK(frame_bytes_at_rate(6e6, 30) == 25'000);
  CHECK(frame_bytes_at_rate(150'000.0, 30) == 625);
  CHECK(frame_bytes_at_rate(0.0, 30) == 0);
  CHECK_THROWS_AS(frame_bytes_at_rate(1e6, 0), std::invalid_argument);
}

TEST_CASE("page expansion shares start and page id and rejects empty pages") {
  CcaConfig cca;
  cca.kind = CcaKind::CUBIC_LIKE;
  auto srcs = make_page_sources({15'000, 15'000, 100}, 10'000'000, 4, cca);
  REQUIRE(srcs.size() == 3);
  for (const auto& s : srcs) {
    CHECK(s.kind == SourceKind::WEB);
    CHECK(s.start_us == 10'000'000);
    CHECK(s.page_id == 4);
    CHECK(s.label == AppClass::WEB);
  }
  CHECK(srcs[2].size_bytes == 100);
  CHECK_THROWS_AS(make_page_sources({}, 0, 0, cca), std::invalid_argument);
  CHECK_THROWS_AS(make_page_sources({0}, 0, 0, cca), std::invalid_argument);
}

TEST_CASE("zero-horizon run delivers nothing") {
  SimConfig cfg = one_link(25'000'000);
  cfg.sources.push_back(web_flow(15'000));
  cfg.duration_us = 0;
  SimTrace t = Simulation(cfg).run();
  CHECK(t.deliveries.empty());
  CHECK(t.drops.empty());
  CHECK(t.queue_samples.empty());
  CHECK(t.delivered_packets == 0);
  CHECK(t.residual_packets == t.enqueued_packets);
}

TEST_CASE("misconfiguration is rejected up front") {
  SimConfig none;
  none.sources.push_back(web_flow(1'000));
  CHECK_THROWS_AS(Simulation{none}, std::invalid_argument);

  SimConfig zero_size = one_link(25'000'000);
  zero_size.sources.push_back(web_flow(0));
  CHECK_THROWS_AS(Simulation{zero_size}, std::invalid_argument);

  // Three hops of 20 ms one-way exceed a 40 ms flow RTT.
  SimConfig chain = one_link(25'000'000);
  chain.links.push_back(chain.links[0]);
  chain.links.push_back(chain.links[0]);
  chain.sources.push_back(web_flow(1'000));
  CHECK_THROWS_AS(Simulation{chain}, std::invalid_argument);

  SimConfig bad_sched = one_link(25'000'000);
  bad_sched.links[0].scheduler = "cake";
  CHECK_THROWS_AS(Simulation{bad_sched}, std::invalid_argument);
}

TEST_CASE("a short transfer delivers its exact byte count and finishes") {
  SimConfig cfg = one_link(25'000'000);
  cfg.sources.push_back(web_flow(15'000));
  cfg.duration_us = 2'000'000;
  SimTrace t = Simulation(cfg).run();
  REQUIRE(t.flows.size() == 1);
  CHECK(t.flows[0].delivered_bytes == 15'000);
  CHECK(t.flows[0].done_us > 0);
  // 10 packets inside the initial window: one-way propagation plus
  // serialization at 480 us per full packet.
  CHECK(t.flows[0].done_us < 40'000);
  CHECK(t.residual_packets == 0);
  CHECK(t.enqueued_packets == t.delivered_packets);
}

TEST_CASE("a one-packet flow completes in a single delivery") {
  SimConfig cfg = one_link(25'000'000);
  cfg.sources.push_back(web_flow(100));
  cfg.duration_us = 1'000'000;
  SimTrace t = Simulation(cfg).run();
  CHECK(t.delivered_packets == 1);
  CHECK(t.flows[0].delivered_bytes == 100);
  CHECK(t.flows[0].done_us > 0);
}

TEST_CASE("same configuration and seed reproduce the trace bit for bit") {
  auto build = [] {
    SimConfig cfg = one_link(10'000'000, 20'000, "red");
    cfg.seed = 42;
    cfg.duration_us = 5'000'000;
    cfg.sources.push_back(web_flow(400'000));
    cfg.sources.push_back(video_flow(CcaKind::GCC_LIKE));
    SourceConfig bulk;
    bulk.kind = SourceKind::BULK;
    bulk.cca.kind = CcaKind::CUBIC_LIKE;
    bulk.start_us = 500'000;
    cfg.sources.push_back(bulk);
    return cfg;
  };
  SimTrace a = Simulation(build()).run();
  SimTrace b = Simulation(build()).run();
  CHECK(a.deliveries.size() > 100);
  CHECK(same_trace(a, b));
}

TEST_CASE("packets admitted balance deliveries, drops, and residue") {
  SimConfig cfg = one_link(5'000'000);
  cfg.links[0].buffer_bytes = 9'000;  // force overflow
  cfg.duration_us = 8'000'000;
  cfg.sources.push_back(web_flow(200'000));
  cfg.sources.push_back(video_flow(CcaKind::CUBIC_LIKE));
  SimTrace t = Simulation(cfg).run();
  CHECK(t.dropped_packets > 0);
  CHECK(t.enqueued_packets ==
        t.delivered_packets + t.dropped_packets + t.residual_packets);
}

TEST_CASE("losses are repaired until the transfer covers every byte") {
  SimConfig cfg = one_link(5'000'000);
  cfg.links[0].buffer_bytes = 6'000;
  cfg.duration_us = 30'000'000;
  cfg.sources.push_back(web_flow(100'000));
  SimTrace t = Simulation(cfg).run();
  CHECK(t.dropped_packets > 0);
  CHECK(t.flows[0].delivered_bytes == 100'000);
  CHECK(t.flows[0].done_us > 0);
}

TEST_CASE("the receiver never sees a flow's sequence numbers regress") {
  SimConfig cfg = one_link(5'000'000);
  cfg.links[0].buffer_bytes = 6'000;
  cfg.duration_us = 20'000'000;
  cfg.sources.push_back(web_flow(80'000));
  cfg.sources.push_back(video_flow(CcaKind::COPA_LIKE));
  SimTrace t = Simulation(cfg).run();
  std::map<FlowId, int64_t> last;
  for (const auto& d : t.deliveries) {
    auto it = last.find(d.flow);
    if (it != last.end()) CHECK(static_cast<int64_t>(d.seq) > it->second);
    last[d.flow] = static_cast<int64_t>(d.seq);
  }
}

TEST_CASE("video frames land on the configured cadence") {
  SimConfig cfg = one_link(25'000'000);
  cfg.sources.push_back(video_flow(CcaKind::FLUID));
  cfg.sources[0].start_us = 100'000;
  cfg.duration_us = 1'000'000;
  SimTrace t = Simulation(cfg).run();
  REQUIRE(t.frames.size() >= 10);
  // Integer division accumulates the remainder instead of drifting.
  CHECK(t.frames[0].gen_us == 100'000);
  CHECK(t.frames[1].gen_us == 133'333);
  CHECK(t.frames[2].gen_us == 166'666);
  CHECK(t.frames[3].gen_us == 200'000);
  for (size_t i = 0; i < 10; i++) {
    CHECK(t.frames[i].gen_us == 100'000 + static_cast<SimTime>(i * 1'000'000 / 30));
    CHECK(t.frames[i].complete);
    CHECK(t.frames[i].done_us > t.frames[i].gen_us);
  }
}

TEST_CASE("a dropped packet leaves its frame permanently incomplete") {
  SimConfig cfg = one_link(2'000'000);
  cfg.links[0].buffer_bytes = 4'500;  // three packets
  cfg.duration_us = 5'000'000;
  SourceConfig v = video_flow(CcaKind::CUBIC_LIKE);
  v.cca.initial_bps = 8'000'000;  // opening burst overwhelms the buffer
  cfg.sources.push_back(v);
  SimTrace t = Simulation(cfg).run();
  CHECK(t.dropped_packets > 0);
  bool any_incomplete = false;
  for (const auto& f : t.frames) {
    if (f.gen_us + 2'000'000 > cfg.duration_us) continue;  // near the horizon
    if (!f.complete) {
      any_incomplete = true;
      CHECK(f.done_us == -1);
    }
  }
  CHECK(any_incomplete);
}

TEST_CASE("flow completion reflects its configured round trip") {
  auto fct = [](SimTime rtt_us) {
    SimConfig cfg = one_link(100'000'000);
    cfg.sources.push_back(web_flow(60'000, 0, rtt_us));
    cfg.duration_us = 5'000'000;
    SimTrace t = Simulation(cfg).run();
    REQUIRE(t.flows[0].done_us > 0);
    return t.flows[0].done_us;
  };
  SimTime fast = fct(40'000);
  SimTime slow = fct(200'000);
  // 60 KB needs two ack-clocked rounds past the initial window, so the
  // difference tracks twice the RTT gap.
  SimTime delta = slow - fast;
  CHECK(delta > 250'000);
  CHECK(delta < 400'000);
}

TEST_CASE("queue samples cover every hop at the configured period") {
  SimConfig cfg = one_link(25'000'000, 5'000);
  cfg.links.push_back(cfg.links[0]);
  cfg.links.push_back(cfg.links[0]);
  cfg.sources.push_back(web_flow(50'000, 0, 40'000));
  cfg.duration_us = 100'000;
  cfg.queue_sample_period_us = 10'000;
  SimTrace t = Simulation(cfg).run();
  REQUIRE(t.queue_samples.size() == 30);  // 10 ticks, three links each
  for (size_t i = 0; i < t.queue_samples.size(); i++) {
    CHECK(t.queue_samples[i].link == static_cast<int>(i % 3));
    CHECK(t.queue_samples[i].at_us ==
          static_cast<SimTime>(10'000 * (i / 3 + 1)));
  }
}

TEST_CASE("serial hops forward traffic and drop only at the bottleneck") {
  SimConfig cfg;
  for (uint64_t bps : {50'000'000ULL, 4'000'000ULL, 50'000'000ULL}) {
    LinkSpec l;
    l.profile = CapacityProfile::constant(bps);
    l.prop_one_way_us = 5'000;
    cfg.links.push_back(l);
  }
  cfg.links[1].buffer_bytes = 9'000;
  cfg.duration_us = 30'000'000;
  cfg.sources.push_back(web_flow(300'000, 0, 40'000));
  SimTrace t = Simulation(cfg).run();
  CHECK(t.flows[0].delivered_bytes == 300'000);
  CHECK(t.flows[0].done_us > 0);
  CHECK(t.dropped_packets > 0);
  for (const auto& d : t.drops) CHECK(d.link == 1);
}

TEST_CASE("an idle horizon leaves no packets in the system") {
  SimConfig cfg = one_link(25'000'000);
  cfg.sources.push_back(web_flow(40'000));
  cfg.duration_us = 10'000'000;  // far beyond the transfer
  SimTrace t = Simulation(cfg).run();
  CHECK(t.residual_packets == 0);
  CHECK(t.enqueued_packets == t.delivered_packets + t.dropped_packets);
}
