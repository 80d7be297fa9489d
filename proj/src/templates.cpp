#include <stdexcept>

#include "confsim/scenario.hpp"

namespace confsim {

namespace {

ScenarioLink managed_link(double capacity_mbps = 25.0,
                          uint64_t buffer_bytes = 0) {
  ScenarioLink l;
  l.capacity_mbps = capacity_mbps;
  l.scheduler = "confucius";
  l.buffer_bytes = buffer_bytes;
  return l;
}

ScenarioSource video(const std::string& cca, double start_ms = 0.0) {
  ScenarioSource v;
  v.kind = "video";
  v.cca = cca;
  v.start_ms = start_ms;
  return v;
}

ScenarioSource fixed_page(uint32_t n, uint64_t flow_bytes, double start_ms) {
  ScenarioSource p;
  p.kind = "page";
  p.cca = "cubic";
  p.page_n = n;
  p.page_flow_bytes = flow_bytes;
  p.start_ms = start_ms;
  return p;
}

ScenarioSource generated_page(double start_ms) {
  ScenarioSource p;
  p.kind = "page";
  p.cca = "cubic";
  p.start_ms = start_ms;
  return p;
}

ScenarioSource bulk(const std::string& cca) {
  ScenarioSource b;
  b.kind = "bulk";
  b.cca = cca;
  return b;
}

// Deep enough that burst arrivals queue instead of dropping: the growth
// behavior under a work-sharing scheduler is the thing being measured.
constexpr uint64_t kDeepBuffer = 4'000'000;

std::vector<Scenario> website_compete() {
  Scenario s;
  s.name = "website_compete";
  s.duration_s = 60.0;
  s.links = {managed_link(25.0, 2'000'000)};
  // One live video call against whole web pages arriving 53 s apart.
  s.sources = {video("gcc"), generated_page(2'000.0),
               generated_page(55'000.0)};
  return {s};
}

std::vector<Scenario> sweep_n() {
  std::vector<Scenario> out;
  for (uint32_t n : {5u, 10u, 20u, 40u, 60u, 80u, 100u}) {
    Scenario s;
    s.name = "sweep_n_" + std::to_string(n);
    s.duration_s = 15.0;
    s.links = {managed_link(25.0, kDeepBuffer)};
    s.sources = {video("fluid"), fixed_page(n, 15'000, 2'000.0)};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> sweep_size() {
  std::vector<Scenario> out;
  for (uint64_t b : {15'000ull, 50'000ull, 150'000ull, 500'000ull,
                     1'500'000ull, 4'500'000ull, 9'000'000ull}) {
    Scenario s;
    s.name = "sweep_size_" + std::to_string(b / 1000) + "k";
    s.duration_s = 30.0;
    s.links = {managed_link(25.0, kDeepBuffer)};
    s.sources = {video("fluid"), fixed_page(5, b, 2'000.0)};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> four_cca() {
  Scenario s;
  s.name = "four_cca";
  s.duration_s = 100.0;
  s.links = {managed_link()};
  s.sources = {bulk("cubic"), bulk("bbr"), bulk("copa"), bulk("gcc")};
  return {s};
}

std::vector<Scenario> abrf_sweep() {
  std::vector<Scenario> out;
  for (const char* cca : {"cubic", "bbr", "copa", "gcc"}) {
    for (bool staged : {false, true}) {
      for (double f : {2.0, 4.0, 8.0, 16.0}) {
        Scenario s;
        s.name = std::string("abrf_") + cca + (staged ? "_staged_" : "_oneshot_") +
                 std::to_string(static_cast<int>(f));
        s.duration_s = 20.0;
        ScenarioLink l = managed_link(25.0, 2'000'000);
        l.step_factor = f;
        l.step_at_ms = 5'000.0;
        l.step_staged = staged;
        s.links = {l};
        s.sources = {video(cca)};
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::vector<Scenario> probing() {
  std::vector<Scenario> out;
  for (double rtt : {20.0, 40.0, 80.0, 120.0, 160.0}) {
    Scenario s;
    s.name = "probing_" + std::to_string(static_cast<int>(rtt));
    s.duration_s = 30.0;
    s.links = {managed_link()};
    ScenarioSource b = bulk("bbr");
    b.rtt_ms = rtt;
    s.sources = {b};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> multi_bottleneck() {
  std::vector<Scenario> out;
  for (const char* sched : {"confucius", "fifo"}) {
    Scenario s;
    s.name = std::string("multi_bottleneck_") + sched;
    s.duration_s = 30.0;
    // Managed hop first, bottleneck in the middle: the managed hop never
    // builds a standing queue, so its scheduler should not matter.
    ScenarioLink managed = managed_link(50.0);
    managed.scheduler = sched;
    managed.prop_ms = 5.0;
    ScenarioLink mid;
    mid.capacity_mbps = 25.0;
    mid.prop_ms = 10.0;
    ScenarioLink last;
    last.capacity_mbps = 50.0;
    last.prop_ms = 5.0;
    s.links = {managed, mid, last};
    s.sources = {video("gcc"), fixed_page(20, 15'000, 2'000.0),
                 bulk("cubic")};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> multi_video() {
  std::vector<Scenario> out;
  for (int k = 1; k <= 5; k++) {
    Scenario s;
    s.name = "multi_video_" + std::to_string(k);
    s.duration_s = 20.0;
    s.links = {managed_link(25.0, kDeepBuffer)};
    for (int i = 0; i < k; i++) s.sources.push_back(video("gcc"));
    s.sources.push_back(fixed_page(40, 15'000, 2'000.0));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<std::string> experiment_names() {
  return {"website_compete", "sweep_n",  "sweep_size",       "four_cca",
          "abrf_sweep",      "probing",  "multi_bottleneck", "multi_video"};
}

std::vector<Scenario> experiment_sweep(const std::string& name) {
  if (name == "website_compete") return website_compete();
  if (name == "sweep_n") return sweep_n();
  if (name == "sweep_size") return sweep_size();
  if (name == "four_cca") return four_cca();
  if (name == "abrf_sweep") return abrf_sweep();
  if (name == "probing") return probing();
  if (name == "multi_bottleneck") return multi_bottleneck();
  if (name == "multi_video") return multi_video();
  throw std::invalid_argument("unknown experiment: " + name);
}

Scenario experiment_template(const std::string& name) {
  return experiment_sweep(name).front();
}

}  // namespace confsim
