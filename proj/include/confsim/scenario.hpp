#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "confsim/sim.hpp"

namespace confsim {

/* A scenario is the file-facing description of one experiment: links,
 * schedulers, traffic, horizon, seed. It expands to a SimConfig; everything
 * here serializes to a flat key tree and back without loss. */

struct ScenarioLink {
  std::string trace_file;       // bandwidth trace path; empty = constant rate
  double capacity_mbps = 25.0;  // used when no trace file is given
  double prop_ms = 20.0;        // one-way propagation
  uint64_t buffer_bytes = 0;    // 0 = engine default (twice the path BDP)
  std::string scheduler = "fifo";
  double lambda_per_ms = 0.004;  // managed-scheduler aging rate
  double alpha = 0.10;           // managed-scheduler share tolerance
  // Optional capacity step-down (bandwidth-reduction experiments):
  // factor 0 disables; one-shot divides by the factor at step_at_ms, staged
  // halves every step_interval_ms until the same floor is reached.
  double step_factor = 0.0;
  double step_at_ms = 5000.0;
  bool step_staged = false;
  double step_interval_ms = 250.0;
};

struct ScenarioSource {
  std::string kind = "bulk";  // video | web | bulk | page
  std::string cca = "cubic";
  std::string label;  // "" = unlabeled, else "realtime" | "web"
  double start_ms = 0.0;
  double rtt_ms = 40.0;
  int fps = 30;               // video
  uint64_t size_bytes = 0;    // web transfer size; bulk: 0 = unbounded
  double fluid_k = 0.001;     // delay-integrating controller gain
  double q0_ms = 5.0;         // its delay target
  // Page expansion (kind = page). Priority: explicit file, then fixed
  // count x size, then the seeded generator.
  std::string page_file;
  uint64_t page_seed = 0;  // 0 = derived from the scenario seed
  uint32_t page_n = 0;
  uint64_t page_flow_bytes = 0;
};

struct Scenario {
  std::string name = "scenario";
  double duration_s = 10.0;
  uint64_t seed = 1;
  bool strip_labels = false;  // drop every app label before the run
  std::vector<ScenarioLink> links;
  std::vector<ScenarioSource> sources;
};

bool operator==(const ScenarioLink& a, const ScenarioLink& b);
bool operator==(const ScenarioSource& a, const ScenarioSource& b);
bool operator==(const Scenario& a, const Scenario& b);

// Flat `key = value` text, one key per line, `#` comments. Doubles use the
// shortest exact form, so serialize -> parse -> serialize is a fixed point.
std::string serialize_scenario(const Scenario& s);
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

// One `dotted.key=value` assignment, same keys the file format uses.
// Unknown field names are rejected; indices may extend the arrays.
void apply_override(Scenario& s, const std::string& assignment);

struct BandwidthTrace {
  CapacityProfile profile;
  double mean_mbps = 0.0;
  double sigma_mbps = 0.0;
};

// Text trace, header line then `time_ms,capacity_mbps` records, times
// strictly increasing from 0. Malformed input fails with the line number.
BandwidthTrace load_bandwidth_trace(const std::string& path);

// Stand-in for recorded traces: piecewise-constant, 500 ms segments, and the
// time-weighted mean lands on the requested value.
void write_synthetic_trace(const std::string& path, double mean_mbps,
                           double duration_ms, uint64_t seed);

// Web page file: one `start_offset_ms,size_bytes` line per flow.
struct PageSpec {
  std::vector<double> start_offset_ms;
  std::vector<uint64_t> size_bytes;
};
PageSpec load_web_trace(const std::string& path);

// Synthetic page: flow count from a discretized log-normal (median 8,
// p90 19, clamped to [1, 250]); sizes log-uniform on [100 B, 100 KB] bent so
// the median sits at 15 KB. Same seed, same page.
PageSpec generate_web_page(uint64_t seed);

// Expand the scenario into an executable simulation config. seed_override
// replaces the scenario seed when non-negative (sweep plumbing).
SimConfig build_sim_config(const Scenario& s, int64_t seed_override = -1);

// Canonical experiment setups by name. experiment_sweep returns every point
// of the named experiment (a single-run experiment yields one element);
// experiment_template is its first point.
Scenario experiment_template(const std::string& name);
std::vector<Scenario> experiment_sweep(const std::string& name);
std::vector<std::string> experiment_names();

}  // namespace confsim
