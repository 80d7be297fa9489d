#include "confsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "confsim/cca.hpp"

namespace confsim {

namespace {

constexpr uint64_t kSeedMix = 0x9E3779B97F4A7C15ull;
constexpr size_t kMaxIndexedEntries = 1000;

std::string trim(std::string_view v) {
  size_t a = v.find_first_not_of(" \t\r");
  size_t b = v.find_last_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  return std::string(v.substr(a, b - a + 1));
}

double to_double(const std::string& v, const std::string& key) {
  double out;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("bad number for " + key + ": " + v);
  return out;
}

uint64_t to_u64(const std::string& v, const std::string& key) {
  uint64_t out;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("bad integer for " + key + ": " + v);
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad flag for " + key + ": " + v);
}

// Shortest exact decimal form: serialize -> parse is the identity on doubles.
std::string dtos(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, p);
}

void set_link_field(ScenarioLink& l, const std::string& f,
                    const std::string& v, const std::string& key) {
  if (f == "trace_file") l.trace_file = v;
  else if (f == "capacity_mbps") l.capacity_mbps = to_double(v, key);
  else if (f == "prop_ms") l.prop_ms = to_double(v, key);
  else if (f == "buffer_bytes") l.buffer_bytes = to_u64(v, key);
  else if (f == "scheduler") l.scheduler = v;
  else if (f == "lambda_per_ms") l.lambda_per_ms = to_double(v, key);
  else if (f == "alpha") l.alpha = to_double(v, key);
  else if (f == "step_factor") l.step_factor = to_double(v, key);
  else if (f == "step_at_ms") l.step_at_ms = to_double(v, key);
  else if (f == "step_staged") l.step_staged = to_bool(v, key);
  else if (f == "step_interval_ms") l.step_interval_ms = to_double(v, key);
  else throw std::invalid_argument("unknown link field: " + key);
}

void set_source_field(ScenarioSource& s, const std::string& f,
                      const std::string& v, const std::string& key) {
  if (f == "kind") s.kind = v;
  else if (f == "cca") s.cca = v;
  else if (f == "label") s.label = v;
  else if (f == "start_ms") s.start_ms = to_double(v, key);
  else if (f == "rtt_ms") s.rtt_ms = to_double(v, key);
  else if (f == "fps") s.fps = static_cast<int>(to_u64(v, key));
  else if (f == "size_bytes") s.size_bytes = to_u64(v, key);
  else if (f == "fluid_k") s.fluid_k = to_double(v, key);
  else if (f == "q0_ms") s.q0_ms = to_double(v, key);
  else if (f == "page_file") s.page_file = v;
  else if (f == "page_seed") s.page_seed = to_u64(v, key);
  else if (f == "page_n") s.page_n = static_cast<uint32_t>(to_u64(v, key));
  else if (f == "page_flow_bytes") s.page_flow_bytes = to_u64(v, key);
  else throw std::invalid_argument("unknown source field: " + key);
}

void set_key(Scenario& s, const std::string& key, const std::string& value) {
  std::vector<std::string> parts;
  size_t pos = 0;
  while (true) {
    size_t dot = key.find('.', pos);
    parts.push_back(key.substr(pos, dot - pos));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  if (parts.size() == 1) {
    if (key == "name") s.name = value;
    else if (key == "duration_s") s.duration_s = to_double(value, key);
    else if (key == "seed") s.seed = to_u64(value, key);
    else if (key == "strip_labels") s.strip_labels = to_bool(value, key);
    else throw std::invalid_argument("unknown scenario key: " + key);
    return;
  }
  if (parts.size() == 3 && (parts[0] == "link" || parts[0] == "source")) {
    size_t idx = static_cast<size_t>(to_u64(parts[1], key));
    if (idx >= kMaxIndexedEntries)
      throw std::invalid_argument("index out of range: " + key);
    if (parts[0] == "link") {
      if (idx >= s.links.size()) s.links.resize(idx + 1);
      set_link_field(s.links[idx], parts[2], value, key);
    } else {
      if (idx >= s.sources.size()) s.sources.resize(idx + 1);
      set_source_field(s.sources[idx], parts[2], value, key);
    }
    return;
  }
  throw std::invalid_argument("unknown scenario key: " + key);
}

std::optional<AppClass> resolve_label(const std::string& label,
                                      const std::string& kind) {
  if (label == "none") return std::nullopt;
  if (label == "realtime") return AppClass::REALTIME;
  if (label == "web") return AppClass::WEB;
  if (!label.empty())
    throw std::invalid_argument("unknown label: " + label);
  // Kind defaults: interactive flows carry their natural class.
  if (kind == "video") return AppClass::REALTIME;
  if (kind == "web" || kind == "page") return AppClass::WEB;
  return std::nullopt;
}

CcaConfig cca_config_for(const ScenarioSource& s) {
  CcaConfig c;
  c.kind = cca_kind_from_string(s.cca);
  c.fluid_k_per_ms2 = s.fluid_k;
  c.fluid_q0_ms = s.q0_ms;
  return c;
}

CapacityProfile apply_step_down(const ScenarioLink& l) {
  uint64_t base = std::llround(l.capacity_mbps * 1e6);
  if (base == 0) throw std::invalid_argument("link capacity must be positive");
  std::vector<CapacityProfile::Step> steps{{0, base}};
  if (l.step_factor > 1.0) {
    SimTime at = std::llround(l.step_at_ms * 1000.0);
    uint64_t target =
        static_cast<uint64_t>(static_cast<double>(base) / l.step_factor);
    if (!l.step_staged) {
      steps.push_back({at, target});
    } else {
      int halvings = static_cast<int>(std::lround(std::log2(l.step_factor)));
      if (std::abs(std::exp2(halvings) - l.step_factor) > 1e-9)
        throw std::invalid_argument(
            "staged step-down needs a power-of-two factor");
      SimTime gap = std::llround(l.step_interval_ms * 1000.0);
      uint64_t c = base;
      for (int i = 0; i < halvings; i++) {
        c /= 2;
        steps.push_back({at + static_cast<SimTime>(i) * gap, c});
      }
    }
  }
  return CapacityProfile(steps);
}

}  // namespace

bool operator==(const ScenarioLink& a, const ScenarioLink& b) {
  return a.trace_file == b.trace_file && a.capacity_mbps == b.capacity_mbps &&
         a.prop_ms == b.prop_ms && a.buffer_bytes == b.buffer_bytes &&
         a.scheduler == b.scheduler && a.lambda_per_ms == b.lambda_per_ms &&
         a.alpha == b.alpha && a.step_factor == b.step_factor &&
         a.step_at_ms == b.step_at_ms && a.step_staged == b.step_staged &&
         a.step_interval_ms == b.step_interval_ms;
}

bool operator==(const ScenarioSource& a, const ScenarioSource& b) {
  return a.kind == b.kind && a.cca == b.cca && a.label == b.label &&
         a.start_ms == b.start_ms && a.rtt_ms == b.rtt_ms && a.fps == b.fps &&
         a.size_bytes == b.size_bytes && a.fluid_k == b.fluid_k &&
         a.q0_ms == b.q0_ms && a.page_file == b.page_file &&
         a.page_seed == b.page_seed && a.page_n == b.page_n &&
         a.page_flow_bytes == b.page_flow_bytes;
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.name == b.name && a.duration_s == b.duration_s &&
         a.seed == b.seed && a.strip_labels == b.strip_labels &&
         a.links == b.links && a.sources == b.sources;
}

std::string serialize_scenario(const Scenario& s) {
  std::string o;
  o += "name = " + s.name + "\n";
  o += "duration_s = " + dtos(s.duration_s) + "\n";
  o += "seed = " + std::to_string(s.seed) + "\n";
  o += "strip_labels = " + std::string(s.strip_labels ? "true" : "false") +
       "\n";
  for (size_t i = 0; i < s.links.size(); i++) {
    const auto& l = s.links[i];
    std::string p = "link." + std::to_string(i) + ".";
    o += "\n";
    if (!l.trace_file.empty()) o += p + "trace_file = " + l.trace_file + "\n";
    o += p + "capacity_mbps = " + dtos(l.capacity_mbps) + "\n";
    o += p + "prop_ms = " + dtos(l.prop_ms) + "\n";
    o += p + "buffer_bytes = " + std::to_string(l.buffer_bytes) + "\n";
    o += p + "scheduler = " + l.scheduler + "\n";
    o += p + "lambda_per_ms = " + dtos(l.lambda_per_ms) + "\n";
    o += p + "alpha = " + dtos(l.alpha) + "\n";
    o += p + "step_factor = " + dtos(l.step_factor) + "\n";
    o += p + "step_at_ms = " + dtos(l.step_at_ms) + "\n";
    o += p + "step_staged = " + std::string(l.step_staged ? "true" : "false") +
         "\n";
    o += p + "step_interval_ms = " + dtos(l.step_interval_ms) + "\n";
  }
  for (size_t i = 0; i < s.sources.size(); i++) {
    const auto& c = s.sources[i];
    std::string p = "source." + std::to_string(i) + ".";
    o += "\n";
    o += p + "kind = " + c.kind + "\n";
    o += p + "cca = " + c.cca + "\n";
    if (!c.label.empty()) o += p + "label = " + c.label + "\n";
    o += p + "start_ms = " + dtos(c.start_ms) + "\n";
    o += p + "rtt_ms = " + dtos(c.rtt_ms) + "\n";
    o += p + "fps = " + std::to_string(c.fps) + "\n";
    o += p + "size_bytes = " + std::to_string(c.size_bytes) + "\n";
    o += p + "fluid_k = " + dtos(c.fluid_k) + "\n";
    o += p + "q0_ms = " + dtos(c.q0_ms) + "\n";
    if (!c.page_file.empty()) o += p + "page_file = " + c.page_file + "\n";
    o += p + "page_seed = " + std::to_string(c.page_seed) + "\n";
    o += p + "page_n = " + std::to_string(c.page_n) + "\n";
    o += p + "page_flow_bytes = " + std::to_string(c.page_flow_bytes) + "\n";
  }
  return o;
}

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  s.links.clear();
  s.sources.clear();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key = value");
    try {
      set_key(s, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void apply_override(Scenario& s, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value: " + assignment);
  set_key(s, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

static BandwidthTrace load_bandwidth_trace_text(std::istream& in,
                                                const std::string& where) {
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<CapacityProfile::Step> steps;
  std::vector<double> caps;
  while (std::getline(in, line)) {
    line_no++;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      if (t.find("time_ms") == std::string::npos)
        throw std::runtime_error(where + ":" + std::to_string(line_no) +
                                 ": missing time_ms,capacity_mbps header");
      header_seen = true;
      continue;
    }
    size_t comma = t.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(where + ":" + std::to_string(line_no) +
                               ": expected time_ms,capacity_mbps");
    double tm, cap;
    try {
      tm = to_double(trim(t.substr(0, comma)), "time_ms");
      cap = to_double(trim(t.substr(comma + 1)), "capacity_mbps");
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(where + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (cap <= 0.0)
      throw std::runtime_error(where + ":" + std::to_string(line_no) +
                               ": capacity must be positive");
    SimTime at = std::llround(tm * 1000.0);
    if (steps.empty() && at != 0)
      throw std::runtime_error(where + ":" + std::to_string(line_no) +
                               ": trace must start at time 0");
    if (!steps.empty() && at <= steps.back().at_us)
      throw std::runtime_error(where + ":" + std::to_string(line_no) +
                               ": times must be strictly increasing");
    steps.push_back({at, static_cast<uint64_t>(std::llround(cap * 1e6))});
    caps.push_back(cap);
  }
  if (!header_seen) throw std::runtime_error(where + ": empty trace");
  if (steps.empty()) throw std::runtime_error(where + ": no records");

  BandwidthTrace out{CapacityProfile(steps), 0.0, 0.0};
  // Segment-weighted moments; the open-ended last segment counts as one
  // average gap (a single-record trace is just that constant).
  size_t n = steps.size();
  std::vector<double> w(n, 1.0);
  if (n > 1) {
    double avg_gap =
        static_cast<double>(steps.back().at_us - steps.front().at_us) /
        static_cast<double>(n - 1);
    for (size_t i = 0; i + 1 < n; i++)
      w[i] = static_cast<double>(steps[i + 1].at_us - steps[i].at_us);
    w[n - 1] = avg_gap;
  }
  double tw = 0, mean = 0;
  for (size_t i = 0; i < n; i++) {
    tw += w[i];
    mean += w[i] * caps[i];
  }
  mean /= tw;
  double var = 0;
  for (size_t i = 0; i < n; i++)
    var += w[i] * (caps[i] - mean) * (caps[i] - mean);
  out.mean_mbps = mean;
  out.sigma_mbps = std::sqrt(var / tw);
  return out;
}

BandwidthTrace load_bandwidth_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bandwidth trace: " + path);
  return load_bandwidth_trace_text(in, path);
}

void write_synthetic_trace(const std::string& path, double mean_mbps,
                           double duration_ms, uint64_t seed) {
  if (mean_mbps <= 0.0 || duration_ms <= 0.0)
    throw std::invalid_argument("synthetic trace needs positive mean and span");
  size_t n = static_cast<size_t>(std::max(1.0, std::ceil(duration_ms / 500.0)));
  std::mt19937_64 rng(seed);
  std::vector<double> caps(n);
  double sum = 0.0;
  for (auto& c : caps) {
    double u = static_cast<double>(rng() >> 11) * 0x1p-53;  // [0,1)
    c = mean_mbps * (0.5 + u);
    sum += c;
  }
  double scale = mean_mbps * static_cast<double>(n) / sum;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "time_ms,capacity_mbps\n";
  char buf[64];
  for (size_t i = 0; i < n; i++) {
    std::snprintf(buf, sizeof buf, "%.1f,%.4f\n",
                  static_cast<double>(i) * 500.0, caps[i] * scale);
    out << buf;
  }
}

PageSpec load_web_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open web trace: " + path);
  PageSpec spec;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line_no++;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      if (t.find("start_offset_ms") == std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": missing start_offset_ms,size_bytes header");
      header_seen = true;
      continue;
    }
    size_t comma = t.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected start_offset_ms,size_bytes");
    double off;
    uint64_t size;
    try {
      off = to_double(trim(t.substr(0, comma)), "start_offset_ms");
      size = to_u64(trim(t.substr(comma + 1)), "size_bytes");
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (off < 0.0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": offset must be non-negative");
    if (size == 0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": size must be positive");
    spec.start_offset_ms.push_back(off);
    spec.size_bytes.push_back(size);
  }
  if (!header_seen) throw std::runtime_error(path + ": empty web trace");
  if (spec.size_bytes.empty())
    throw std::runtime_error(path + ": no flows in web trace");
  return spec;
}

PageSpec generate_web_page(uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;  // (0,1)
  };
  // Flow count: log-normal with median 8 and the 90th percentile at 19,
  // rounded and clamped to [1, 250].
  constexpr double kMu = 2.0794415416798357;  // ln 8
  constexpr double kSigma = 0.67490294528523;  // (ln 19 - ln 8) / z_0.90
  double z = std::sqrt(-2.0 * std::log(uniform())) *
             std::cos(2.0 * M_PI * uniform());
  long count = std::lround(std::exp(kMu + kSigma * z));
  count = std::clamp(count, 1l, 250l);

  // Sizes: log-uniform on [100 B, 100 KB] bent at 15 KB so half the mass
  // falls on each side; the distribution median is exactly 15 KB.
  constexpr double kLo = 100.0, kMid = 15'000.0, kHi = 100'000.0;
  PageSpec spec;
  for (long i = 0; i < count; i++) {
    double u = uniform();
    double sz = u < 0.5 ? kLo * std::pow(kMid / kLo, u / 0.5)
                        : kMid * std::pow(kHi / kMid, (u - 0.5) / 0.5);
    spec.start_offset_ms.push_back(0.0);
    spec.size_bytes.push_back(
        static_cast<uint64_t>(std::max(kLo, std::round(sz))));
  }
  return spec;
}

SimConfig build_sim_config(const Scenario& s, int64_t seed_override) {
  if (s.duration_s <= 0.0)
    throw std::invalid_argument("scenario duration must be positive");
  if (s.links.empty())
    throw std::invalid_argument("scenario needs at least one link");
  if (s.sources.empty())
    throw std::invalid_argument("scenario needs at least one source");

  SimConfig cfg;
  cfg.seed = seed_override >= 0 ? static_cast<uint64_t>(seed_override) : s.seed;
  cfg.duration_us = std::llround(s.duration_s * 1e6);

  for (const auto& l : s.links) {
    LinkSpec spec;
    if (!l.trace_file.empty()) {
      if (l.step_factor > 1.0)
        throw std::invalid_argument(
            "capacity step-down applies to constant-rate links only");
      spec.profile = load_bandwidth_trace(l.trace_file).profile;
    } else {
      spec.profile = apply_step_down(l);
    }
    spec.prop_one_way_us = std::llround(l.prop_ms * 1000.0);
    spec.buffer_bytes = l.buffer_bytes;
    spec.scheduler = l.scheduler;
    spec.confucius.lambda_per_ms = l.lambda_per_ms;
    spec.confucius.alpha = l.alpha;
    cfg.links.push_back(std::move(spec));
  }

  uint32_t next_page_id = 0;
  for (size_t i = 0; i < s.sources.size(); i++) {
    const auto& src = s.sources[i];
    if (src.kind == "page") {
      next_page_id++;
      PageSpec page;
      if (!src.page_file.empty()) {
        page = load_web_trace(src.page_file);
      } else if (src.page_n > 0) {
        uint64_t sz = src.page_flow_bytes ? src.page_flow_bytes : 15'000;
        page.start_offset_ms.assign(src.page_n, 0.0);
        page.size_bytes.assign(src.page_n, sz);
      } else {
        uint64_t ps = src.page_seed
                          ? src.page_seed
                          : cfg.seed ^ (kSeedMix * (static_cast<uint64_t>(i) + 1));
        page = generate_web_page(ps);
      }
      for (size_t j = 0; j < page.size_bytes.size(); j++) {
        SourceConfig c;
        c.kind = SourceKind::WEB;
        c.cca = cca_config_for(src);
        c.label = resolve_label(src.label, src.kind);
        c.start_us =
            std::llround((src.start_ms + page.start_offset_ms[j]) * 1000.0);
        c.rtt_base_us = std::llround(src.rtt_ms * 1000.0);
        c.size_bytes = page.size_bytes[j];
        c.page_id = next_page_id;
        cfg.sources.push_back(std::move(c));
      }
      continue;
    }
    SourceConfig c;
    if (src.kind == "video") c.kind = SourceKind::VIDEO;
    else if (src.kind == "web") c.kind = SourceKind::WEB;
    else if (src.kind == "bulk") c.kind = SourceKind::BULK;
    else throw std::invalid_argument("unknown source kind: " + src.kind);
    c.cca = cca_config_for(src);
    c.label = resolve_label(src.label, src.kind);
    c.start_us = std::llround(src.start_ms * 1000.0);
    c.rtt_base_us = std::llround(src.rtt_ms * 1000.0);
    c.fps = src.fps;
    c.size_bytes = src.size_bytes;
    cfg.sources.push_back(std::move(c));
  }

  if (s.strip_labels)
    for (auto& c : cfg.sources) c.label.reset();
  return cfg;
}

}  // namespace confsim
