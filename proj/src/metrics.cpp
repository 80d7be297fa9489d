#include "confsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace confsim {

namespace {

constexpr double kDefaultFrameIntervalMs = 1000.0 / 30.0;

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

void append_fmt(std::string& out, const char* fmt, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, fmt);
  int n = std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  out.append(buf, static_cast<size_t>(n));
}

}  // namespace

FrameDelaySeries frame_delay_series(const std::vector<FrameRecord>& frames,
                                    FlowId flow, SimTime horizon_us) {
  FrameDelaySeries out;
  for (const auto& f : frames) {
    if (f.flow != flow) continue;
    SimTime end = (f.complete && f.done_us >= 0) ? f.done_us : horizon_us;
    out.push_back({static_cast<double>(f.gen_us) / 1000.0,
                   static_cast<double>(end - f.gen_us) / 1000.0});
  }
  std::sort(out.begin(), out.end(),
            [](const FrameDelayPoint& a, const FrameDelayPoint& b) {
              return a.gen_ms < b.gen_ms;
            });
  return out;
}

double stall_duration_ms(const FrameDelaySeries& series, double threshold_ms) {
  if (series.empty()) throw std::invalid_argument("empty frame delay series");
  double stall = 0.0;
  for (size_t i = 0; i < series.size(); i++) {
    double interval;
    if (i + 1 < series.size()) {
      interval = series[i + 1].gen_ms - series[i].gen_ms;
    } else if (series.size() >= 2) {
      interval = series[i].gen_ms - series[i - 1].gen_ms;
    } else {
      interval = kDefaultFrameIntervalMs;
    }
    if (series[i].delay_ms > threshold_ms) stall += interval;
  }
  return stall;
}

PageLoad page_load_time(const std::vector<FlowRecord>& flows, uint32_t page_id,
                        SimTime horizon_us) {
  SimTime start = -1, last_done = 0;
  bool any = false, all_done = true;
  for (const auto& f : flows) {
    if (f.page_id != page_id) continue;
    any = true;
    if (start < 0 || f.start_us < start) start = f.start_us;
    if (f.done_us < 0) {
      all_done = false;
    } else {
      last_done = std::max(last_done, f.done_us);
    }
  }
  if (!any) throw std::invalid_argument("no flows for the requested page");
  PageLoad p;
  p.page_id = page_id;
  p.incomplete = !all_done;
  SimTime end = all_done ? last_done : horizon_us;
  p.plt_ms = static_cast<double>(end - start) / 1000.0;
  return p;
}

double jfi(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("jfi of an empty set");
  double sum = 0.0, sq = 0.0;
  for (double x : xs) {
    if (x < 0.0) throw std::invalid_argument("jfi of a negative share");
    sum += x;
    sq += x * x;
  }
  if (sum <= 0.0) throw std::invalid_argument("jfi of all-zero shares");
  return sum * sum / (static_cast<double>(xs.size()) * sq);
}

std::vector<RatePoint> service_rate_series(
    const std::vector<DeliveryRecord>& deliveries, FlowId flow,
    double window_ms, SimTime horizon_us, double step_ms) {
  if (window_ms <= 0.0) throw std::invalid_argument("window must be positive");
  SimTime window_us = std::llround(window_ms * 1000.0);
  SimTime step_us =
      step_ms > 0.0 ? std::llround(step_ms * 1000.0) : window_us;
  if (step_us <= 0) throw std::invalid_argument("step must be positive");

  std::vector<std::pair<SimTime, uint32_t>> pts;
  for (const auto& d : deliveries)
    if (d.flow == flow) pts.emplace_back(d.at_us, d.size);
  std::sort(pts.begin(), pts.end());

  std::vector<RatePoint> out;
  size_t lo = 0, hi = 0;
  uint64_t bytes_in = 0;
  for (SimTime t = window_us; t <= horizon_us; t += step_us) {
    while (hi < pts.size() && pts[hi].first <= t) bytes_in += pts[hi++].second;
    while (lo < hi && pts[lo].first <= t - window_us) bytes_in -= pts[lo++].second;
    out.push_back({t, static_cast<double>(bytes_in) * 8000.0 / window_ms});
  }
  return out;
}

DelayQuantiles packet_delay_quantiles(
    const std::vector<DeliveryRecord>& deliveries) {
  DelayQuantiles q;
  if (deliveries.empty()) return q;
  std::vector<double> d;
  d.reserve(deliveries.size());
  for (const auto& r : deliveries)
    d.push_back(static_cast<double>(r.at_us - r.sent_us) / 1000.0);
  std::sort(d.begin(), d.end());
  auto rank = [&](double p) {
    size_t i = static_cast<size_t>(std::ceil(p * static_cast<double>(d.size())));
    return d[std::min(i > 0 ? i - 1 : 0, d.size() - 1)];
  };
  q.p50_ms = rank(0.50);
  q.p90_ms = rank(0.90);
  q.p99_ms = rank(0.99);
  q.max_ms = d.back();
  return q;
}

std::string to_string(SourceKind k) {
  switch (k) {
    case SourceKind::VIDEO: return "video";
    case SourceKind::WEB: return "web";
    case SourceKind::BULK: return "bulk";
  }
  throw std::logic_error("unknown source kind");
}

RunReport build_report(const SimTrace& trace, double stall_threshold_ms) {
  RunReport rep;

  std::vector<double> shares;
  for (const auto& f : trace.flows) {
    FlowSummary s;
    s.flow = f.flow;
    s.kind = to_string(f.kind);
    s.page_id = f.page_id;
    s.completed = f.done_us >= 0;
    SimTime end = s.completed ? f.done_us : trace.duration_us;
    s.fct_ms = static_cast<double>(end - f.start_us) / 1000.0;
    s.intended_bytes = f.intended_bytes;
    s.delivered_bytes = f.delivered_bytes;
    s.cca = f.cca;
    rep.flows.push_back(std::move(s));
    shares.push_back(static_cast<double>(f.delivered_bytes));

    if (f.kind == SourceKind::VIDEO) {
      auto series = frame_delay_series(trace.frames, f.flow, trace.duration_us);
      double stall =
          series.empty() ? 0.0 : stall_duration_ms(series, stall_threshold_ms);
      rep.stalls.push_back({f.flow, stall});
      rep.total_stall_ms += stall;
      for (const auto& p : series)
        rep.max_frame_delay_ms = std::max(rep.max_frame_delay_ms, p.delay_ms);
    }
  }

  std::set<uint32_t> page_ids;
  for (const auto& f : trace.flows)
    if (f.kind == SourceKind::WEB) page_ids.insert(f.page_id);
  for (uint32_t id : page_ids)
    rep.pages.push_back(page_load_time(trace.flows, id, trace.duration_us));

  bool any_share = false;
  for (double x : shares) any_share = any_share || x > 0.0;
  if (any_share) rep.jfi = jfi(shares);

  rep.packet_delay = packet_delay_quantiles(trace.deliveries);
  return rep;
}

void write_report_json(const RunReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["jfi"] = report.jfi;
  j["total_stall_ms"] = report.total_stall_ms;
  j["max_frame_delay_ms"] = report.max_frame_delay_ms;
  j["packet_delay_ms"] = {{"p50", report.packet_delay.p50_ms},
                          {"p90", report.packet_delay.p90_ms},
                          {"p99", report.packet_delay.p99_ms},
                          {"max", report.packet_delay.max_ms}};
  j["stalls"] = nlohmann::ordered_json::array();
  for (const auto& s : report.stalls)
    j["stalls"].push_back({{"flow", s.flow}, {"stall_ms", s.stall_ms}});
  j["pages"] = nlohmann::ordered_json::array();
  for (const auto& p : report.pages)
    j["pages"].push_back({{"page_id", p.page_id},
                          {"plt_ms", p.plt_ms},
                          {"incomplete", p.incomplete}});
  j["flows"] = nlohmann::ordered_json::array();
  for (const auto& f : report.flows)
    j["flows"].push_back({{"flow", f.flow},
                          {"kind", f.kind},
                          {"page_id", f.page_id},
                          {"fct_ms", f.fct_ms},
                          {"completed", f.completed},
                          {"intended_bytes", f.intended_bytes},
                          {"delivered_bytes", f.delivered_bytes},
                          {"cca", f.cca}});
  write_text_file(path, j.dump(2) + "\n");
}

void write_frames_csv(const SimTrace& trace, const std::string& path) {
  std::string out = "flow,frame_id,gen_us,done_us,packets,complete\n";
  for (const auto& f : trace.frames)
    append_fmt(out, "%u,%u,%lld,%lld,%u,%d\n", f.flow, f.frame_id,
               static_cast<long long>(f.gen_us),
               static_cast<long long>(f.done_us), f.packets,
               f.complete ? 1 : 0);
  write_text_file(path, out);
}

void write_flows_csv(const SimTrace& trace, const std::string& path) {
  std::string out =
      "flow,kind,page_id,start_us,done_us,intended_bytes,delivered_bytes,cca\n";
  for (const auto& f : trace.flows)
    append_fmt(out, "%u,%s,%u,%lld,%lld,%llu,%llu,%s\n", f.flow,
               to_string(f.kind).c_str(), f.page_id,
               static_cast<long long>(f.start_us),
               static_cast<long long>(f.done_us),
               static_cast<unsigned long long>(f.intended_bytes),
               static_cast<unsigned long long>(f.delivered_bytes),
               f.cca.c_str());
  write_text_file(path, out);
}

void write_rates_csv(const SimTrace& trace, const std::string& path,
                     double window_ms, double step_ms) {
  std::string out = "flow,at_us,bits_per_s\n";
  for (const auto& f : trace.flows) {
    auto series = service_rate_series(trace.deliveries, f.flow, window_ms,
                                      trace.duration_us, step_ms);
    for (const auto& p : series)
      append_fmt(out, "%u,%lld,%.3f\n", f.flow,
                 static_cast<long long>(p.at_us), p.bits_per_s);
  }
  write_text_file(path, out);
}

}  // namespace confsim
