#include "confsim/cca.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace confsim {

CcaKind cca_kind_from_string(const std::string& s) {
  if (s == "fluid") return CcaKind::FLUID;
  if (s == "cubic") return CcaKind::CUBIC_LIKE;
  if (s == "copa") return CcaKind::COPA_LIKE;
  if (s == "gcc") return CcaKind::GCC_LIKE;
  if (s == "bbr") return CcaKind::BBR_LIKE;
  throw std::invalid_argument("unknown cca: " + s);
}

std::string to_string(CcaKind k) {
  switch (k) {
    case CcaKind::FLUID: return "fluid";
    case CcaKind::CUBIC_LIKE: return "cubic";
    case CcaKind::COPA_LIKE: return "copa";
    case CcaKind::GCC_LIKE: return "gcc";
    case CcaKind::BBR_LIKE: return "bbr";
  }
  return "?";
}

double fluid_cca_step(double rate_bps, double q_delayed_ms, double dt_ms,
                      double k_per_ms2, double q0_ms, double scale_bps,
                      double floor_bps, double ceiling_bps) {
  if (dt_ms <= 0.0) throw std::invalid_argument("dt must be positive");
  double next = rate_bps - k_per_ms2 * (q_delayed_ms - q0_ms) * dt_ms * scale_bps;
  return std::clamp(next, floor_bps, ceiling_bps);
}

namespace {

/* Shared bookkeeping: base-delay tracking and a smoothed delivery-rate
 * estimate (bytes acked per unit time, stepped once per RTT epoch). */
struct AckClock {
  SimTime min_rtt_us = 0;      // lifetime minimum; 0 = no sample yet
  SimTime last_ack_us = -1;
  uint64_t epoch_bytes = 0;
  SimTime epoch_start_us = -1;
  double delivery_bps = 0.0;

  void observe(SimTime now, SimTime rtt_us, uint32_t acked_bytes) {
    if (min_rtt_us == 0 || rtt_us < min_rtt_us) min_rtt_us = rtt_us;
    if (epoch_start_us < 0) epoch_start_us = now;
    epoch_bytes += acked_bytes;
    SimTime span = now - epoch_start_us;
    if (span >= std::max<SimTime>(min_rtt_us, 1'000)) {
      double inst = static_cast<double>(epoch_bytes) * 8e6 / static_cast<double>(span);
      delivery_bps = delivery_bps <= 0.0 ? inst : 0.7 * delivery_bps + 0.3 * inst;
      epoch_bytes = 0;
      epoch_start_us = now;
    }
    last_ack_us = now;
  }

  double queue_ms(SimTime rtt_us) const {
    if (min_rtt_us == 0 || rtt_us <= min_rtt_us) return 0.0;
    return static_cast<double>(rtt_us - min_rtt_us) / 1000.0;
  }
};

class FluidCca final : public Cca {
public:
  explicit FluidCca(const CcaConfig& c) : cfg_(c), rate_(c.initial_bps) {}

  void on_ack(SimTime now, SimTime rtt_us, uint32_t acked_bytes) override {
    clock_.observe(now, rtt_us, acked_bytes);
    if (last_step_us_ < 0) {
      last_step_us_ = now;
      return;
    }
    if (now <= last_step_us_) return;
    double dt_ms = static_cast<double>(now - last_step_us_) / 1000.0;
    last_step_us_ = now;
    // The ack stream reports the queue as it stood one RTT ago, which is
    // exactly the delayed feedback the controller wants.
    double scale = clock_.delivery_bps > 0.0 ? clock_.delivery_bps : rate_;
    rate_ = fluid_cca_step(rate_, clock_.queue_ms(rtt_us), dt_ms,
                           cfg_.fluid_k_per_ms2, cfg_.fluid_q0_ms, scale,
                           cfg_.floor_bps, cfg_.ceiling_bps);
  }

  void on_loss(SimTime) override {}  // pure delay controller

  double pacing_bps() const override { return rate_; }

  uint64_t cwnd_bytes() const override {
    // The integrator carries no damping, so its oscillation grows until
    // something contains it. An inflight valve at twice the delay target puts
    // rails symmetrically around q0: the limit cycle stays centered and the
    // long-run averages land on (capacity, q0) regardless of the path RTT.
    double rtt_s = static_cast<double>(
                       clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us) /
                   1e6;
    double horizon_s = rtt_s + 2.0 * cfg_.fluid_q0_ms / 1e3;
    return static_cast<uint64_t>(
        std::max(rate_ * horizon_s / 8.0, 2.0 * cfg_.mtu_bytes));
  }

  CcaKind kind() const override { return CcaKind::FLUID; }

private:
  CcaConfig cfg_;
  AckClock clock_;
  double rate_;
  SimTime last_step_us_ = -1;
};

/* Window algorithm with cubic growth toward the pre-loss plateau. The web
 * sources use this one; its initial window is the standard 10-packet burst. */
class CubicCca final : public Cca {
public:
  explicit CubicCca(const CcaConfig& c)
      : cfg_(c), cwnd_(10.0 * c.mtu_bytes), ssthresh_(1e18) {}

  void on_ack(SimTime now, SimTime rtt_us, uint32_t acked_bytes) override {
    clock_.observe(now, rtt_us, acked_bytes);
    if (cwnd_ < ssthresh_) {
      cwnd_ += acked_bytes;  // slow start
      return;
    }
    if (epoch_start_us_ < 0) start_epoch(now);
    double t_s = static_cast<double>(now - epoch_start_us_) / 1e6;
    double mtu = cfg_.mtu_bytes;
    double w_target_pkts = kC * std::pow(t_s - k_s_, 3.0) + w_max_ / mtu;
    double target = w_target_pkts * mtu;
    if (target > cwnd_) {
      // Growth is ack-clocked: never add more than what was just acked.
      cwnd_ += std::min(static_cast<double>(acked_bytes), target - cwnd_);
    } else {
      cwnd_ += 0.01 * acked_bytes;  // plateau creep keeps the probe alive
    }
    cwnd_ = std::min(cwnd_, max_cwnd());
  }

  void on_loss(SimTime now) override {
    w_max_ = cwnd_;
    ssthresh_ = std::max(cwnd_ * kBeta, 2.0 * cfg_.mtu_bytes);
    cwnd_ = ssthresh_;
    start_epoch(now);
  }

  double pacing_bps() const override { return cfg_.ceiling_bps; }
  uint64_t cwnd_bytes() const override { return static_cast<uint64_t>(cwnd_); }
  CcaKind kind() const override { return CcaKind::CUBIC_LIKE; }

private:
  static constexpr double kC = 0.4;     // pkts/s^3
  static constexpr double kBeta = 0.7;

  void start_epoch(SimTime now) {
    epoch_start_us_ = now;
    double mtu = cfg_.mtu_bytes;
    k_s_ = std::cbrt((w_max_ / mtu) * (1.0 - kBeta) / kC);
  }

  double max_cwnd() const {
    double rtt_s = static_cast<double>(
                       clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us) /
                   1e6;
    return std::max(cfg_.ceiling_bps * rtt_s / 8.0, 20.0 * cfg_.mtu_bytes);
  }

  CcaConfig cfg_;
  AckClock clock_;
  double cwnd_;
  double ssthresh_;
  double w_max_ = 0.0;
  double k_s_ = 0.0;
  SimTime epoch_start_us_ = -1;
};

/* Delay-target rate controller: the rate rides the measured delivery rate,
 * pushed above it while the queue sits under the delay target and below it
 * once the queue overshoots. The one-RTT-old feedback makes the loop ring
 * with a period of a few RTTs instead of converging flat. */
class CopaCca final : public Cca {
public:
  explicit CopaCca(const CcaConfig& c) : cfg_(c), rate_(c.initial_bps) {}

  void on_ack(SimTime now, SimTime rtt_us, uint32_t acked_bytes) override {
    clock_.observe(now, rtt_us, acked_bytes);
    if (clock_.delivery_bps <= 0.0) return;  // no anchor until the first epoch
    double q_ms = clock_.queue_ms(rtt_us);
    double err = (cfg_.copa_target_ms - q_ms) / cfg_.copa_target_ms;
    err = std::clamp(err, -1.0, 1.0);
    rate_ = clock_.delivery_bps * (1.0 + cfg_.copa_gain * err);
    rate_ = std::clamp(rate_, cfg_.floor_bps, cfg_.ceiling_bps);
  }

  void on_loss(SimTime) override {}

  double pacing_bps() const override { return rate_; }

  uint64_t cwnd_bytes() const override {
    double rtt_s = static_cast<double>(
                       clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us) /
                   1e6;
    return static_cast<uint64_t>(std::max(8.0 * rate_ * rtt_s / 8.0,
                                          20.0 * cfg_.mtu_bytes));
  }

  CcaKind kind() const override { return CcaKind::COPA_LIKE; }

private:
  CcaConfig cfg_;
  AckClock clock_;
  double rate_;
  SimTime last_us_ = -1;
};

/* Delay-gradient controller: a smoothed queue-delay slope drives
 * overuse/underuse decisions behind an adaptive threshold, in the style of
 * WebRTC's bandwidth estimator. Three guards keep scheduler jitter from
 * starving the sender: cuts are blocked while the queue sits below a small
 * delay floor, the threshold inflates quickly when the smoothed slope lives
 * outside it (and relaxes slowly), and a cut lands on 0.85x the measured
 * delivery rate rather than compounding on the sender's own rate. Growth is
 * multiplicative, capped near the delivery rate. */
class GccCca final : public Cca {
public:
  explicit GccCca(const CcaConfig& c)
      : cfg_(c), rate_(c.initial_bps), gamma_(c.gcc_gradient_threshold) {}

  void on_ack(SimTime now, SimTime rtt_us, uint32_t acked_bytes) override {
    clock_.observe(now, rtt_us, acked_bytes);
    double q_ms = clock_.queue_ms(rtt_us);
    if (last_us_ < 0) {
      last_us_ = now;
      last_q_ms_ = q_ms;
      return;
    }
    if (now <= last_us_) return;
    double dt_ms = static_cast<double>(now - last_us_) / 1000.0;
    double grad = (q_ms - last_q_ms_) / dt_ms;
    double blend = 1.0 - std::exp2(-dt_ms / kGradHalfLifeMs);
    grad_ema_ += blend * (grad - grad_ema_);
    last_us_ = now;
    last_q_ms_ = q_ms;

    // Threshold adaptation: chase |slope| upward fast, decay back slowly.
    double mag = std::abs(grad_ema_);
    double k = mag > gamma_ ? kGammaUpPerMs : kGammaDownPerMs;
    gamma_ = std::clamp(gamma_ + k * (mag - gamma_) * dt_ms,
                        cfg_.gcc_gradient_threshold,
                        kGammaMaxRatio * cfg_.gcc_gradient_threshold);

    double rtt_us_est = static_cast<double>(
        clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us);
    bool over = grad_ema_ > gamma_ && q_ms > cfg_.gcc_q_floor_ms;
    if (over) {
      overuse_ms_ += dt_ms;
      if (overuse_ms_ >= kOveruseHoldMs &&
          now - last_cut_us_ >= static_cast<SimTime>(rtt_us_est)) {
        double anchor = clock_.delivery_bps > 0.0 ? clock_.delivery_bps : rate_;
        rate_ = std::min(rate_, cfg_.gcc_decrease * anchor);
        last_cut_us_ = now;
        overuse_ms_ = 0.0;
      }
    } else {
      overuse_ms_ = 0.0;
      if (grad_ema_ >= -gamma_) {
        rate_ *= 1.0 + cfg_.gcc_increase_per_rtt * (dt_ms * 1000.0 / rtt_us_est);
        if (clock_.delivery_bps > 0.0)
          rate_ = std::min(rate_, kRateCapRatio * clock_.delivery_bps);
      }
      // else: queue draining, hold
    }
    rate_ = std::clamp(rate_, cfg_.floor_bps, cfg_.ceiling_bps);
  }

  // Loss backstop: a pinned-full drop-tail queue has zero delay slope, so
  // the gradient path alone would idle at the cap while the buffer drops.
  void on_loss(SimTime now) override {
    double rtt_us_est = static_cast<double>(
        clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us);
    if (now - last_cut_us_ < static_cast<SimTime>(rtt_us_est)) return;
    double anchor = clock_.delivery_bps > 0.0 ? clock_.delivery_bps : rate_;
    rate_ = std::clamp(std::min(rate_, cfg_.gcc_decrease * anchor),
                       cfg_.floor_bps, cfg_.ceiling_bps);
    last_cut_us_ = now;
    overuse_ms_ = 0.0;
  }

  double pacing_bps() const override { return rate_; }

  uint64_t cwnd_bytes() const override {
    double rtt_s = static_cast<double>(
                       clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us) /
                   1e6;
    return static_cast<uint64_t>(std::max(8.0 * rate_ * rtt_s / 8.0,
                                          20.0 * cfg_.mtu_bytes));
  }

  CcaKind kind() const override { return CcaKind::GCC_LIKE; }

private:
  static constexpr double kGradHalfLifeMs = 20.0;
  static constexpr double kGammaUpPerMs = 0.02;
  static constexpr double kGammaDownPerMs = 0.001;
  static constexpr double kGammaMaxRatio = 15.0;
  static constexpr double kOveruseHoldMs = 20.0;
  static constexpr double kRateCapRatio = 1.5;

  CcaConfig cfg_;
  AckClock clock_;
  double rate_;
  double gamma_;
  double grad_ema_ = 0.0;
  double overuse_ms_ = 0.0;
  double last_q_ms_ = 0.0;
  SimTime last_us_ = -1;
  SimTime last_cut_us_ = -1'000'000;
};

/* Window algorithm cycling eight gain phases over an estimated
 * bandwidth-delay product. The window (not pacing) carries the cycle, which
 * parks the standing queue near one BDP: the middle occupancy band. */
class BbrCca final : public Cca {
public:
  explicit BbrCca(const CcaConfig& c) : cfg_(c) {
    btlbw_ = std::max(c.initial_bps,
                      10.0 * c.mtu_bytes * 8e6 / static_cast<double>(c.rtt_guess_us));
  }

  void on_ack(SimTime now, SimTime rtt_us, uint32_t acked_bytes) override {
    clock_.observe(now, rtt_us, acked_bytes);
    if (clock_.delivery_bps > 0.0) {
      samples_.push_back({now, clock_.delivery_bps});
      SimTime window = 10 * min_rtt();
      while (!samples_.empty() && samples_.front().at < now - window) {
        samples_.pop_front();
      }
      double m = 0.0;
      for (const auto& s : samples_) m = std::max(m, s.bps);
      btlbw_ = std::max(m, cfg_.floor_bps);
    }

    if (startup_) {
      if (rtt_boundary(now)) {
        if (btlbw_ < 1.25 * btlbw_at_boundary_) {
          if (++flat_rtts_ >= 3) startup_ = false;
        } else {
          flat_rtts_ = 0;
        }
        btlbw_at_boundary_ = btlbw_;
      }
      return;
    }
    if (phase_start_us_ < 0) phase_start_us_ = now;
    if (now - phase_start_us_ >= min_rtt()) {
      phase_ = (phase_ + 1) % 8;
      phase_start_us_ = now;
    }
  }

  void on_loss(SimTime) override {}  // model probes by delay, not loss

  double pacing_bps() const override { return cfg_.ceiling_bps; }

  uint64_t cwnd_bytes() const override {
    double bdp = btlbw_ * static_cast<double>(min_rtt()) / 8e6;
    double gain = startup_ ? 2.0 : kGain[phase_];
    return static_cast<uint64_t>(
        std::max(gain * 2.0 * bdp, 4.0 * cfg_.mtu_bytes));
  }

  CcaKind kind() const override { return CcaKind::BBR_LIKE; }

private:
  static constexpr double kGain[8] = {1.25, 0.75, 1, 1, 1, 1, 1, 1};

  SimTime min_rtt() const {
    return clock_.min_rtt_us > 0 ? clock_.min_rtt_us : cfg_.rtt_guess_us;
  }

  bool rtt_boundary(SimTime now) {
    if (boundary_us_ < 0 || now - boundary_us_ >= min_rtt()) {
      boundary_us_ = now;
      return true;
    }
    return false;
  }

  struct Sample {
    SimTime at;
    double bps;
  };

  CcaConfig cfg_;
  AckClock clock_;
  std::deque<Sample> samples_;
  double btlbw_;
  double btlbw_at_boundary_ = 0.0;
  int flat_rtts_ = 0;
  bool startup_ = true;
  int phase_ = 0;
  SimTime phase_start_us_ = -1;
  SimTime boundary_us_ = -1;
};

}  // namespace

std::unique_ptr<Cca> make_cca(const CcaConfig& cfg) {
  switch (cfg.kind) {
    case CcaKind::FLUID: return std::make_unique<FluidCca>(cfg);
    case CcaKind::CUBIC_LIKE: return std::make_unique<CubicCca>(cfg);
    case CcaKind::COPA_LIKE: return std::make_unique<CopaCca>(cfg);
    case CcaKind::GCC_LIKE: return std::make_unique<GccCca>(cfg);
    case CcaKind::BBR_LIKE: return std::make_unique<BbrCca>(cfg);
  }
  throw std::invalid_argument("unknown cca kind");
}

} // namespace confsim
