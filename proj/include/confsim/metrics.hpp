#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "confsim/sim.hpp"

namespace confsim {

// One frame's position on the playout timeline and how late it arrived.
struct FrameDelayPoint {
  double gen_ms;    // generation instant
  double delay_ms;  // completion minus generation; horizon-bounded if unfinished
};
using FrameDelaySeries = std::vector<FrameDelayPoint>;

// Per-flow delay series from the raw frame ledger. A frame that never
// completed is late by construction: its delay runs to the horizon.
FrameDelaySeries frame_delay_series(const std::vector<FrameRecord>& frames,
                                    FlowId flow, SimTime horizon_us);

// Total time the playout spends stalled: the sum of inter-frame intervals
// whose frame arrived later than the threshold. Delay is held
// piecewise-constant between frame instants; the last frame extends over one
// more interval of the same spacing.
double stall_duration_ms(const FrameDelaySeries& series,
                         double threshold_ms = 190.0);

struct PageLoad {
  uint32_t page_id;
  double plt_ms;    // last flow completion minus page start
  bool incomplete;  // horizon hit first; plt_ms then runs to the horizon
};

// flows: the whole run's flow table; only rows matching page_id count.
PageLoad page_load_time(const std::vector<FlowRecord>& flows, uint32_t page_id,
                        SimTime horizon_us);

// (sum x)^2 / (n * sum x^2). Requires at least one entry, none negative,
// not all zero.
double jfi(const std::vector<double>& xs);

struct RatePoint {
  SimTime at_us;
  double bits_per_s;
};

// Delivered bits over a sliding window, reported every step_ms (0 means one
// point per window). Points run from the first full window to the horizon.
std::vector<RatePoint> service_rate_series(
    const std::vector<DeliveryRecord>& deliveries, FlowId flow,
    double window_ms, SimTime horizon_us, double step_ms = 0.0);

struct DelayQuantiles {
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

// One-way packet delays (delivery minus send), nearest-rank quantiles.
DelayQuantiles packet_delay_quantiles(
    const std::vector<DeliveryRecord>& deliveries);

struct FlowStall {
  FlowId flow;
  double stall_ms;
};

struct FlowSummary {
  FlowId flow;
  std::string kind;
  uint32_t page_id;
  double fct_ms;  // runs to the horizon when incomplete
  bool completed;
  uint64_t intended_bytes;
  uint64_t delivered_bytes;
  std::string cca;
};

struct RunReport {
  double jfi = 0.0;  // over whole-run delivered bytes
  double total_stall_ms = 0.0;
  double max_frame_delay_ms = 0.0;
  DelayQuantiles packet_delay;
  std::vector<FlowStall> stalls;  // one row per video flow
  std::vector<PageLoad> pages;    // one row per page id present
  std::vector<FlowSummary> flows;
};

RunReport build_report(const SimTrace& trace,
                       double stall_threshold_ms = 190.0);

std::string to_string(SourceKind k);

// Plotting exports. All formatting is locale-independent and byte-stable:
// the same trace always serializes to identical files.
void write_report_json(const RunReport& report, const std::string& path);
void write_frames_csv(const SimTrace& trace, const std::string& path);
void write_flows_csv(const SimTrace& trace, const std::string& path);
void write_rates_csv(const SimTrace& trace, const std::string& path,
                     double window_ms = 100.0, double step_ms = 10.0);

}  // namespace confsim
