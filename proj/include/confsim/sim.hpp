#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "confsim/cca.hpp"
#include "confsim/confucius.hpp"
#include "confsim/link.hpp"
#include "confsim/packet.hpp"

namespace confsim {

struct LinkSpec {
  CapacityProfile profile;
  SimTime prop_one_way_us = 20'000;
  uint64_t buffer_bytes = 0;  // 0: twice the path BDP at peak capacity
  std::string scheduler = "fifo";
  ConfuciusConfig confucius;
};

enum class SourceKind { VIDEO, WEB, BULK };

struct SourceConfig {
  SourceKind kind = SourceKind::BULK;
  CcaConfig cca;
  std::optional<AppClass> label;
  SimTime start_us = 0;
  SimTime rtt_base_us = 40'000;  // two-way propagation for this flow's path
  int fps = 30;                  // video
  uint64_t size_bytes = 0;       // web transfer size; ignored elsewhere
  uint32_t page_id = 0;          // groups web flows into a page
};

struct SimConfig {
  std::vector<LinkSpec> links;  // serial path, first hop is the managed one
  std::vector<SourceConfig> sources;
  SimTime duration_us = 10'000'000;
  uint64_t seed = 1;
  SimTime queue_sample_period_us = 1'000;
};

struct DeliveryRecord {
  SimTime at_us;       // arrival at the receiver
  FlowId flow;
  uint64_t seq;
  uint32_t size;
  SimTime sent_us;
};

struct DropRecord {
  SimTime at_us;
  int link;
  FlowId flow;
  uint64_t seq;
  uint32_t size;
};

struct FrameRecord {
  FlowId flow;
  uint32_t frame_id;
  SimTime gen_us;
  SimTime done_us;  // -1 while incomplete
  uint32_t packets;
  bool complete;
};

struct FlowRecord {
  FlowId flow;
  SourceKind kind;
  uint32_t page_id;
  SimTime start_us;
  SimTime done_us;  // -1 if not finished by the horizon
  uint64_t intended_bytes;
  uint64_t delivered_bytes;  // unique payload at the receiver
  std::string cca;
};

struct QueueSample {
  SimTime at_us;
  int link;
  uint64_t bytes;
};

struct SimTrace {
  SimTime duration_us = 0;
  std::vector<DeliveryRecord> deliveries;
  std::vector<DropRecord> drops;
  std::vector<FrameRecord> frames;
  std::vector<FlowRecord> flows;
  std::vector<QueueSample> queue_samples;
  std::vector<QueueMove> moves;          // managed hop only
  std::vector<ClassifySample> classify;  // managed hop only
  uint64_t enqueued_packets = 0;   // sender emissions into the first hop
  uint64_t delivered_packets = 0;  // at the receiver
  uint64_t dropped_packets = 0;    // across all hops
  uint64_t residual_packets = 0;   // queued or in flight at the horizon
};

/* One sender-side path: sources feed the first link, links chain in series,
 * the far end acks straight back to the source after the flow's configured
 * reverse delay. Strictly single-threaded; determinism comes from the event
 * queue's (time, insertion) order and the seeded schedulers. */
class Simulation {
public:
  explicit Simulation(SimConfig cfg);
  ~Simulation();

  SimTrace run();

  Qdisc& qdisc(int link = 0);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/* Frame packetization: MTU-sized packets sharing one frame identity; the
 * last packet carries the remainder. bytes == 0 still yields one keep-alive
 * packet so the frame clock never goes silent. */
std::vector<Packet> packetize_frame(FlowId flow, uint64_t seq_start,
                                    uint32_t frame_id, uint64_t bytes,
                                    SimTime gen_us, uint32_t mtu = kMtuBytes);

/* Frame payload for one tick of a rate-driven source. */
uint64_t frame_bytes_at_rate(double rate_bps, int fps);

/* Expand a page of sized transfers into web source configs sharing a page
 * id and a simultaneous start. */
std::vector<SourceConfig> make_page_sources(const std::vector<uint64_t>& sizes,
                                            SimTime start_us, uint32_t page_id,
                                            const CcaConfig& cca);

} // namespace confsim
