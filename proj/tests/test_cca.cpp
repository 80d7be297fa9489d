#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "confsim/cca.hpp"
#include "confsim/sim.hpp"

using namespace confsim;

namespace {

constexpr double kFloor = 150'000.0;
constexpr double kCeil = 2e9;

struct LoopStats {
  double tput_bps;
  double mean_delay_ms;
  double period_ms;  // rising-edge hysteresis crossings around q0
};

/* One long-lived sender on a constant-capacity hop; measurements start at
 * settle_us so the startup transient stays out of the averages. */
LoopStats run_loop(CcaKind kind, double k, SimTime rtt_us, uint64_t buffer,
                   SimTime horizon_us, SimTime settle_us) {
  const uint64_t C = 25'000'000;
  SimConfig cfg;
  LinkSpec l;
  l.profile = CapacityProfile::constant(C);
  l.prop_one_way_us = rtt_us / 2;
  l.buffer_bytes = buffer;
  cfg.links.push_back(l);
  SourceConfig s;
  s.kind = SourceKind::BULK;
  s.cca.kind = kind;
  s.cca.fluid_k_per_ms2 = k;
  s.cca.initial_bps = static_cast<double>(C);
  s.rtt_base_us = rtt_us;
  cfg.sources.push_back(s);
  cfg.duration_us = horizon_us;
  SimTrace t = Simulation(cfg).run();

  double qsum = 0, qn = 0;
  for (const auto& q : t.queue_samples) {
    if (q.at_us < settle_us) continue;
    qsum += static_cast<double>(q.bytes);
    qn++;
  }
  double bytes = 0;
  for (const auto& d : t.deliveries)
    if (d.at_us >= settle_us) bytes += d.size;

  double q0_bytes = 5.0 * C / 8000.0;
  std::vector<double> cross;
  bool below = true;
  for (const auto& q : t.queue_samples) {
    if (q.at_us < settle_us) continue;
    if (below && q.bytes >= 1.2 * q0_bytes) {
      cross.push_back(static_cast<double>(q.at_us));
      below = false;
    } else if (!below && q.bytes <= 0.8 * q0_bytes) {
      below = true;
    }
  }

  LoopStats out;
  out.tput_bps = bytes * 8e6 / static_cast<double>(horizon_us - settle_us);
  out.mean_delay_ms = qsum / qn * 8000.0 / C;
  out.period_ms = cross.size() > 1
                      ? (cross.back() - cross.front()) / (cross.size() - 1) / 1000.0
                      : 0.0;
  return out;
}

double mean_occupancy(CcaKind kind, uint64_t buffer_bytes) {
  const uint64_t C = 25'000'000;
  SimConfig cfg;
  LinkSpec l;
  l.profile = CapacityProfile::constant(C);
  l.buffer_bytes = buffer_bytes;
  cfg.links.push_back(l);
  SourceConfig s;
  s.kind = SourceKind::BULK;
  s.cca.kind = kind;
  cfg.sources.push_back(s);
  cfg.duration_us = 40'000'000;
  SimTrace t = Simulation(cfg).run();
  double sum = 0, n = 0;
  for (const auto& q : t.queue_samples) {
    if (q.at_us < 5'000'000) continue;
    sum += static_cast<double>(q.bytes);
    n++;
  }
  return sum / n / static_cast<double>(buffer_bytes);
}

}  // namespace

TEST_CASE("the rate step rejects non-positive time increments") {
  CHECK_THROWS_AS(fluid_cca_step(1e6, 5.0, 0.0, 0.001, 5.0, 25e6, kFloor, kCeil),
                  std::invalid_argument);
  CHECK_THROWS_AS(fluid_cca_step(1e6, 5.0, -1.0, 0.001, 5.0, 25e6, kFloor, kCeil),
                  std::invalid_argument);
}

TEST_CASE("the rate step holds at the target and moves against the error") {
  // Queue exactly on target: fixed point.
  CHECK(fluid_cca_step(1e6, 5.0, 1.0, 0.001, 5.0, 25e6, kFloor, kCeil) ==
        doctest::Approx(1e6));
  // Above target: strictly down, by k * dq * dt * scale.
  CHECK(fluid_cca_step(1e6, 7.0, 2.0, 0.001, 5.0, 25e6, kFloor, kCeil) ==
        doctest::Approx(1e6 - 0.001 * 2.0 * 2.0 * 25e6));
  // Below target: strictly up, same magnitude.
  CHECK(fluid_cca_step(1e6, 3.0, 2.0, 0.001, 5.0, 25e6, kFloor, kCeil) ==
        doctest::Approx(1e6 + 0.001 * 2.0 * 2.0 * 25e6));
}

TEST_CASE("the rate step clamps to the configured operating range") {
  CHECK(fluid_cca_step(200'000, 500.0, 10.0, 0.001, 5.0, 25e6, kFloor, kCeil) ==
        doctest::Approx(kFloor));
  CHECK(fluid_cca_step(1.9e9, -500.0, 10.0, 0.01, 5.0, 25e6, kFloor, kCeil) ==
        doctest::Approx(kCeil));
}

TEST_CASE("algorithm names round trip through the factory") {
  for (const char* name : {"fluid", "cubic", "copa", "gcc", "bbr"}) {
    CcaKind k = cca_kind_from_string(name);
    CHECK(to_string(k) == name);
    CcaConfig cfg;
    cfg.kind = k;
    CHECK(make_cca(cfg)->kind() == k);
  }
  CHECK_THROWS_AS(cca_kind_from_string("reno"), std::invalid_argument);
}

TEST_CASE("the window sender opens with a ten-packet burst and doubles per round") {
  CcaConfig cfg;
  cfg.kind = CcaKind::CUBIC_LIKE;
  auto cca = make_cca(cfg);
  CHECK(cca->cwnd_bytes() == 15'000);
  for (int i = 0; i < 10; i++) cca->on_ack(1'000 * (i + 1), 40'000, 1'500);
  CHECK(cca->cwnd_bytes() == 30'000);  // one window's acks double it
}

TEST_CASE("the window sender backs off on loss and regrows to the old plateau") {
  CcaConfig cfg;
  cfg.kind = CcaKind::CUBIC_LIKE;
  auto cca = make_cca(cfg);
  SimTime now = 0;
  while (cca->cwnd_bytes() < 150'000) {
    now += 1'000;
    cca->on_ack(now, 40'000, 1'500);
  }
  uint64_t w_max = cca->cwnd_bytes();
  cca->on_loss(now);
  CHECK(cca->cwnd_bytes() ==
        doctest::Approx(0.7 * static_cast<double>(w_max)).epsilon(1e-6));

  // Concave recovery: monotone, and back at the plateau after
  // K = cbrt(w_max_pkts * 0.3 / 0.4) seconds.
  double k_s = std::cbrt(static_cast<double>(w_max) / 1500.0 * 0.3 / 0.4);
  uint64_t prev = cca->cwnd_bytes();
  SimTime t_end = now + static_cast<SimTime>((k_s + 0.3) * 1e6);
  while (now < t_end) {
    now += 5'000;
    cca->on_ack(now, 40'000, 1'500);
    CHECK(cca->cwnd_bytes() >= prev);
    prev = cca->cwnd_bytes();
  }
  CHECK(static_cast<double>(cca->cwnd_bytes()) >
        0.95 * static_cast<double>(w_max));
  CHECK(static_cast<double>(cca->cwnd_bytes()) <
        1.10 * static_cast<double>(w_max));
}

TEST_CASE("the delay-target sender straddles its delivery anchor") {
  CcaConfig cfg;
  cfg.kind = CcaKind::COPA_LIKE;
  auto cca = make_cca(cfg);
  // Prime one full delivery epoch at 24 Mbps, base RTT 50 ms.
  for (int i = 1; i <= 60; i++) cca->on_ack(1'000 * i, 50'000, 3'000);
  // Empty queue: pushed a full gain step above the anchor.
  cca->on_ack(62'000, 50'000, 100);
  double above = cca->pacing_bps();
  // Queue far past the target: a full gain step below the same anchor.
  cca->on_ack(63'000, 65'000, 100);
  double below = cca->pacing_bps();
  CHECK(above > below);
  CHECK(above / below == doctest::Approx(1.2 / 0.8).epsilon(1e-9));
}

TEST_CASE("the gradient sender cuts once on a sustained climb past the floor") {
  CcaConfig cfg;
  cfg.kind = CcaKind::GCC_LIKE;
  cfg.initial_bps = 1e6;
  auto cca = make_cca(cfg);
  cca->on_ack(1'000, 40'000, 100);  // first sample only primes
  CHECK(cca->pacing_bps() == doctest::Approx(1e6));

  // Queue climbing 2 ms per ms, sampled every ms. The delay floor passes at
  // 2 ms in; the smoothed slope and the overuse dwell delay the cut well
  // beyond that, and the acks stay inside one delivery epoch so the cut
  // lands on 0.85x the sender's own rate.
  SimTime cut_at = 0;
  double pre_cut = 0, post_cut = 0;
  for (int i = 1; i <= 38 && cut_at == 0; i++) {
    double prev = cca->pacing_bps();
    cca->on_ack(1'000 + 1'000 * i, 40'000 + 2'000 * i, 100);
    if (cca->pacing_bps() < prev) {
      cut_at = 1'000 + 1'000 * i;
      pre_cut = prev;
      post_cut = cca->pacing_bps();
    }
  }
  REQUIRE(cut_at > 0);
  CHECK(cut_at >= 22'000);  // floor crossing + 20 ms dwell at the least
  CHECK(post_cut == doctest::Approx(0.85 * pre_cut));

  // The climb continues, but a second cut is gated for a full round trip
  // and overuse suppresses growth: the rate holds exactly.
  for (SimTime t = cut_at + 1'000; t <= 39'000; t += 1'000) {
    cca->on_ack(t, 40'000 + 2 * (t - 1'000), 100);
    CHECK(cca->pacing_bps() == doctest::Approx(post_cut));
  }

  // Draining queue: hold, neither cut nor growth.
  cca->on_ack(40'000, 90'000, 100);
  cca->on_ack(41'000, 86'000, 100);
  cca->on_ack(42'000, 82'000, 100);
  CHECK(cca->pacing_bps() == doctest::Approx(post_cut));
}

TEST_CASE("shallow queue jitter never cuts the gradient sender") {
  CcaConfig cfg;
  cfg.kind = CcaKind::GCC_LIKE;
  cfg.initial_bps = 1e6;
  auto cca = make_cca(cfg);
  cca->on_ack(500, 40'000, 100);
  // Sawtooth of 0-2 ms queue flapping every ms: steep instantaneous slopes,
  // but always below the delay floor. No overuse cut may fire; the delivery
  // cap can wiggle the rate by a hair as its estimate updates, nothing more.
  double low_water = cca->pacing_bps();
  for (int i = 1; i <= 200; i++) {
    double prev = cca->pacing_bps();
    cca->on_ack(500 + 1'000 * i, 40'000 + (i % 2) * 2'000, 100);
    CHECK(cca->pacing_bps() >= 0.98 * prev);
  }
  CHECK(cca->pacing_bps() > low_water);
}

TEST_CASE("gradient cuts anchor to delivery rate and growth is capped near it") {
  CcaConfig cfg;
  cfg.kind = CcaKind::GCC_LIKE;
  cfg.initial_bps = 100e6;  // start far above what the path delivers
  auto cca = make_cca(cfg);
  // 3000 B every ms at a flat 50 ms round trip; the first delivery sample
  // completes after one 50 ms epoch and covers all 51 acks.
  for (int i = 0; i <= 50; i++) cca->on_ack(1'000 + 1'000 * i, 50'000, 3'000);
  double delivered = 51.0 * 3'000.0 * 8e6 / 50'000.0;
  cca->on_ack(52'000, 50'000, 3'000);
  CHECK(cca->pacing_bps() == doctest::Approx(1.5 * delivered));  // capped growth

  // Sustained climb past the floor: the cut lands on 0.85x delivery, far
  // below the capped rate.
  for (int i = 1; i <= 40; i++) cca->on_ack(52'000 + 1'000 * i, 50'000 + 2'000 * i, 3'000);
  CHECK(cca->pacing_bps() == doctest::Approx(0.85 * delivered));
}

TEST_CASE("the phase-cycling sender parks its window on two delay products") {
  CcaConfig cfg;
  cfg.kind = CcaKind::BBR_LIKE;
  auto cca = make_cca(cfg);
  // 6250 B every 5 ms at a constant 50 ms round trip: 10 Mbps delivered,
  // bandwidth-delay product 62500 B.
  SimTime now = 0;
  for (int i = 0; i < 400; i++) {
    now += 5'000;
    cca->on_ack(now, 50'000, 6'250);
  }
  uint64_t lo = UINT64_MAX, hi = 0;
  for (int i = 0; i < 80; i++) {  // one full gain cycle per 400 ms
    now += 5'000;
    cca->on_ack(now, 50'000, 6'250);
    lo = std::min(lo, cca->cwnd_bytes());
    hi = std::max(hi, cca->cwnd_bytes());
  }
  CHECK(hi == 156'250);  // probe phase: 1.25 x 2 x BDP
  CHECK(lo == 93'750);   // drain phase: 0.75 x 2 x BDP
  // The base-delay estimate is a lifetime minimum: a queue-inflated round
  // trip must not widen the window.
  for (int i = 0; i < 20; i++) {
    now += 5'000;
    cca->on_ack(now, 120'000, 6'250);
    CHECK(cca->cwnd_bytes() <= 156'250);
  }
}

TEST_CASE("a lone fluid sender settles on the capacity and the delay target") {
  // Settling bound: 20 / sqrt(k) ms.
  LoopStats s = run_loop(CcaKind::FLUID, 0.001, 10'000, 1'000'000, 30'000'000,
                         633'000);
  CHECK(s.tput_bps == doctest::Approx(25e6).epsilon(0.05));
  CHECK(s.mean_delay_ms == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("the fluid probing period follows two pi over root k") {
  LoopStats a = run_loop(CcaKind::FLUID, 0.001, 10'000, 1'000'000, 40'000'000,
                         633'000);
  LoopStats b = run_loop(CcaKind::FLUID, 0.0005, 10'000, 1'000'000, 40'000'000,
                         895'000);
  double expect_a = 2.0 * M_PI / std::sqrt(0.001);
  double expect_b = 2.0 * M_PI / std::sqrt(0.0005);
  CHECK(a.period_ms == doctest::Approx(expect_a).epsilon(0.10));
  CHECK(b.period_ms == doctest::Approx(expect_b).epsilon(0.10));
  // Quartering k doubles the period; halving it gives root two.
  CHECK(b.period_ms / a.period_ms == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("the delay-target relay rings at a few round trips") {
  const uint64_t C = 25'000'000;
  SimConfig cfg;
  LinkSpec l;
  l.profile = CapacityProfile::constant(C);
  l.prop_one_way_us = 20'000;
  l.buffer_bytes = 1'000'000;
  cfg.links.push_back(l);
  SourceConfig s;
  s.kind = SourceKind::BULK;
  s.cca.kind = CcaKind::COPA_LIKE;
  s.cca.initial_bps = static_cast<double>(C);
  cfg.sources.push_back(s);
  cfg.duration_us = 40'000'000;
  SimTrace t = Simulation(cfg).run();
  double sum = 0, n = 0;
  for (const auto& q : t.queue_samples) {
    if (q.at_us >= 5'000'000) {
      sum += static_cast<double>(q.bytes);
      n++;
    }
  }
  double mean = sum / n;
  std::vector<double> cross;
  bool below = true;
  for (const auto& q : t.queue_samples) {
    if (q.at_us < 5'000'000) continue;
    if (below && q.bytes >= 1.25 * mean) {
      cross.push_back(static_cast<double>(q.at_us));
      below = false;
    } else if (!below && q.bytes <= 0.75 * mean) {
      below = true;
    }
  }
  REQUIRE(cross.size() > 20);
  double period_rtts =
      (cross.back() - cross.front()) / (cross.size() - 1) / 40'000.0;
  CHECK(period_rtts > 3.0);
  CHECK(period_rtts < 7.0);
}

TEST_CASE("steady senders sort into three occupancy bands on a drop-tail queue") {
  // Deep buffer: twice the bandwidth-delay product (250 KB at 25 Mbps, 40 ms).
  double copa = mean_occupancy(CcaKind::COPA_LIKE, 250'000);
  double gcc = mean_occupancy(CcaKind::GCC_LIKE, 250'000);
  double cubic = mean_occupancy(CcaKind::CUBIC_LIKE, 250'000);
  double bbr = mean_occupancy(CcaKind::BBR_LIKE, 250'000);
  CHECK(copa < 0.20);
  CHECK(gcc < 0.20);
  CHECK(cubic > 0.80);
  CHECK(bbr > 0.20);
  CHECK(bbr < 0.80);
}
