#pragma once

#include <string>
#include <vector>

#include "confsim/metrics.hpp"
#include "confsim/scenario.hpp"

namespace confsim {

struct RunResult {
  Scenario scenario;
  uint64_t seed = 0;
  SimTrace trace;
  RunReport report;
};

RunResult run_scenario(const Scenario& s, int64_t seed_override = -1);

struct RunJob {
  Scenario scenario;
  int64_t seed_override = -1;
};

// Executes the jobs on a small pool; instances share nothing, so results are
// identical to a sequential run, in job order.
std::vector<RunResult> run_batch(const std::vector<RunJob>& jobs,
                                 int threads = 8);

struct CompareRow {
  std::string scheduler;
  uint64_t seed;
  double stall_ms;
  double plt_ms;  // mean over the run's pages
  double jfi;
};

// Scheduler x seed cross product on the scenario's first link.
std::vector<CompareRow> compare_schedulers(
    const Scenario& base, const std::vector<std::string>& schedulers,
    const std::vector<uint64_t>& seeds, int threads = 8);

// Row per run plus one `mean` aggregate row per scheduler.
std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace confsim
