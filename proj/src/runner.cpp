#include "confsim/runner.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <thread>

namespace confsim {

RunResult run_scenario(const Scenario& s, int64_t seed_override) {
  RunResult r;
  r.scenario = s;
  SimConfig cfg = build_sim_config(s, seed_override);
  r.seed = cfg.seed;
  r.trace = Simulation(cfg).run();
  r.report = build_report(r.trace);
  return r;
}

std::vector<RunResult> run_batch(const std::vector<RunJob>& jobs,
                                 int threads) {
  std::vector<RunResult> results(jobs.size());
  if (jobs.empty()) return results;
  size_t pool = std::min<size_t>(std::max(threads, 1), jobs.size());
  std::atomic<size_t> next{0};
  // Failures surface after the pool drains; the first job's error wins.
  std::vector<std::string> errors(jobs.size());
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = run_scenario(jobs[i].scenario, jobs[i].seed_override);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> ts;
  for (size_t i = 0; i < pool; i++) ts.emplace_back(worker);
  for (auto& t : ts) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  return results;
}

std::vector<CompareRow> compare_schedulers(
    const Scenario& base, const std::vector<std::string>& schedulers,
    const std::vector<uint64_t>& seeds, int threads) {
  if (schedulers.empty())
    throw std::invalid_argument("compare needs at least one scheduler");
  if (seeds.empty())
    throw std::invalid_argument("compare needs at least one seed");
  if (base.links.empty())
    throw std::invalid_argument("compare needs a scenario with a link");

  std::vector<RunJob> jobs;
  for (const auto& sched : schedulers) {
    for (uint64_t seed : seeds) {
      RunJob j;
      j.scenario = base;
      j.scenario.links[0].scheduler = sched;
      j.seed_override = static_cast<int64_t>(seed);
      jobs.push_back(std::move(j));
    }
  }
  std::vector<RunResult> results = run_batch(jobs, threads);

  std::vector<CompareRow> rows;
  for (size_t i = 0; i < results.size(); i++) {
    const RunReport& rep = results[i].report;
    double plt = 0.0;
    for (const auto& p : rep.pages) plt += p.plt_ms;
    if (!rep.pages.empty()) plt /= static_cast<double>(rep.pages.size());
    rows.push_back({jobs[i].scenario.links[0].scheduler, results[i].seed,
                    rep.total_stall_ms, plt, rep.jfi});
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "scheduler,seed,stall_ms,plt_ms,jfi\n";
  char buf[160];
  std::map<std::string, std::array<double, 4>> agg;  // sums + count
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%.6f,%.6f,%.6f\n",
                  r.scheduler.c_str(),
                  static_cast<unsigned long long>(r.seed), r.stall_ms,
                  r.plt_ms, r.jfi);
    out += buf;
    auto& a = agg[r.scheduler];
    a[0] += r.stall_ms;
    a[1] += r.plt_ms;
    a[2] += r.jfi;
    a[3] += 1.0;
  }
  for (const auto& [sched, a] : agg) {
    std::snprintf(buf, sizeof buf, "%s,mean,%.6f,%.6f,%.6f\n", sched.c_str(),
                  a[0] / a[3], a[1] / a[3], a[2] / a[3]);
    out += buf;
  }
  return out;
}

}  // namespace confsim
