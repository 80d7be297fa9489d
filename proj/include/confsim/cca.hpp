#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "confsim/packet.hpp"
#include "confsim/time_types.hpp"

namespace confsim {

enum class CcaKind { FLUID, CUBIC_LIKE, COPA_LIKE, GCC_LIKE, BBR_LIKE };

CcaKind cca_kind_from_string(const std::string& s);
std::string to_string(CcaKind k);

struct CcaConfig {
  CcaKind kind = CcaKind::FLUID;
  double floor_bps = 150'000.0;
  double ceiling_bps = 2'000'000'000.0;
  double initial_bps = 1'000'000.0;  // rate-based algorithms start here

  // FLUID: d(rate)/dt = -k * (q(t-tau) - q0) * scale, ack-clocked.
  double fluid_k_per_ms2 = 0.001;
  double fluid_q0_ms = 5.0;

  double copa_target_ms = 5.0;
  double copa_gain = 0.2;  // fractional push around the delivery anchor

  double gcc_gradient_threshold = 0.02;  // queue-delay slope, ms per ms
  double gcc_increase_per_rtt = 0.08;
  double gcc_decrease = 0.85;
  double gcc_q_floor_ms = 4.0;  // no cuts while the queue sits below this

  uint32_t mtu_bytes = kMtuBytes;
  SimTime rtt_guess_us = 40'000;  // seeds estimators before the first sample
};

/* Sender-side congestion control, clocked by acknowledgments. Window
 * algorithms bound inflight via cwnd_bytes() and leave pacing unbounded;
 * rate algorithms do the reverse (with a loose inflight safety cap). */
class Cca {
public:
  virtual ~Cca() = default;

  virtual void on_ack(SimTime now, SimTime rtt_us, uint32_t acked_bytes) = 0;
  virtual void on_loss(SimTime now) = 0;

  virtual double pacing_bps() const = 0;
  virtual uint64_t cwnd_bytes() const = 0;
  virtual CcaKind kind() const = 0;
};

std::unique_ptr<Cca> make_cca(const CcaConfig& cfg);

/* One Euler step of the rate controller used by the abstract fluid sender:
 * rate <- rate - k * (q_delayed - q0) * dt * scale, clamped. Throws on
 * non-positive dt. */
double fluid_cca_step(double rate_bps, double q_delayed_ms, double dt_ms,
                      double k_per_ms2, double q0_ms, double scale_bps,
                      double floor_bps, double ceiling_bps);

} // namespace confsim
