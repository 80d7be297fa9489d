#pragma once

#include <cstdint>
#include <optional>

#include "confsim/time_types.hpp"

namespace confsim {

using FlowId = uint32_t;

constexpr uint32_t kMtuBytes = 1500;

/* Application label. Optional: schedulers that use it (class-based ones) treat
 * an unlabeled packet as WEB; the occupancy-driven scheduler never reads it. */
enum class AppClass : uint8_t { REALTIME, WEB };

struct Packet {
  FlowId flow = 0;
  uint32_t size = kMtuBytes;       // wire size, bytes
  uint64_t seq = 0;                // per-flow transmission counter, strictly increasing
  SimTime sent_us = 0;             // time the sender emitted it
  SimTime enqueued_us = 0;         // arrival at the current hop's queue
  uint64_t enq_order = 0;          // per-qdisc arrival stamp, set on enqueue
  std::optional<AppClass> app_class;

  // Video framing; zero frame_packets for non-video traffic.
  uint32_t frame_id = 0;
  uint32_t frame_packets = 0;      // packets in this frame
  SimTime frame_gen_us = 0;

  // Payload byte range carried (for sized flows / retransmissions).
  uint64_t payload_off = 0;
  uint32_t payload_len = 0;
};

} // namespace confsim
