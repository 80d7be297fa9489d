#include "confsim/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace confsim::fluid {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLn2 = 0.69314718055994530942;

void validate(const FluidParams& p) {
  if (!(p.k > 0.0) || !(p.q0 > 0.0) || !(p.tau > 0.0) || !(p.c_bits_per_ms > 0.0)) {
    throw std::invalid_argument("fluid params: k, q0, tau, C must be positive");
  }
  if (p.lambda < 0.0 || p.n_flows < 0.0 || p.b_bytes < 0.0 || p.b0_bytes < 0.0) {
    throw std::invalid_argument("fluid params: lambda, N, B, B0 must be non-negative");
  }
}

// Shared peak-delay constant of the constant-rate policies: the sender
// overshoots for 2/3*sqrt(2/k) past its target before the loop closes.
double overshoot_ms(const FluidParams& p) {
  return (2.0 / 3.0) * std::sqrt(2.0 / p.k) + p.q0 + p.tau;
}

// Root of s(t)=0 for s ~ a*exp(-lam*(t-tau)) + b*cos(sqrt(k)*(t-tau)),
// quadratic Taylor in (t-tau). lam is the decay actually applied.
double t0_of(double k, double tau, double lam, double c) {
  const double a = c * (k / 2.0) / (lam * lam + k * std::exp(lam * tau));
  const double b = c - a;
  if (b <= 0.0) {
    throw std::domain_error("t0_root: degenerate expansion (decay term >= capacity)");
  }
  const double la = lam * a;
  return (-la + std::sqrt(la * la + 2.0 * b * k * (a + b))) / (b * k);
}

// Normalized (fraction-of-C) service rate granted to the pre-existing flow.
double rate_norm(Policy policy, const FluidParams& p, double t_ms) {
  const double fair = 1.0 / (p.n_flows + 1.0);
  switch (policy) {
    case Policy::kFq:
      return fair;
    case Policy::kFifo: {
      const double own = p.q0 * p.c_bits_per_ms;
      const double burst = p.n_flows * 8.0 * p.b0_bytes;
      return own / (own + burst);
    }
    case Policy::kCbq:
      return 0.5;
    case Policy::kConfucius:
      return std::max(0.5 * std::exp2(-p.lambda * t_ms), fair);
  }
  return fair;
}

// Integral of the normalized Confucius envelope max(0.5*2^(-lam*t), fair)
// over [0, t_hi].
double confucius_rate_integral(double lam, double n_flows, double t_hi) {
  const double fair = 1.0 / (n_flows + 1.0);
  if (lam <= 0.0) return std::max(0.5, fair) * t_hi;
  if (fair >= 0.5) return fair * t_hi;
  const double lam_e = lam * kLn2;
  const double t_floor = std::log2((n_flows + 1.0) / 2.0) / lam;
  const double t_env = std::min(t_hi, t_floor);
  double acc = (0.5 / lam_e) * (1.0 - std::exp(-lam_e * t_env));
  if (t_hi > t_floor) acc += fair * (t_hi - t_floor);
  return acc;
}

}  // namespace

Policy policy_from_name(const std::string& name) {
  if (name == "fq") return Policy::kFq;
  if (name == "fifo") return Policy::kFifo;
  if (name == "cbq") return Policy::kCbq;
  if (name == "confucius") return Policy::kConfucius;
  throw std::invalid_argument("unknown fluid policy: " + name);
}

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kFq: return "fq";
    case Policy::kFifo: return "fifo";
    case Policy::kCbq: return "cbq";
    case Policy::kConfucius: return "confucius";
  }
  return "?";
}

std::vector<std::string> param_warnings(const FluidParams& p) {
  std::vector<std::string> out;
  char buf[128];
  if (p.tau * std::sqrt(p.k) > 0.3) {
    std::snprintf(buf, sizeof(buf),
                  "tau*sqrt(k)=%.3f exceeds 0.3; quadratic rate expansion degrades",
                  p.tau * std::sqrt(p.k));
    out.emplace_back(buf);
  }
  if (p.lambda > 0.02) {
    std::snprintf(buf, sizeof(buf),
                  "lambda=%.4f is outside the series expansion radius", p.lambda);
    out.emplace_back(buf);
  }
  return out;
}

double qmax_fq(const FluidParams& p) {
  validate(p);
  return p.n_flows * overshoot_ms(p);
}

double qmax_fifo(const FluidParams& p) {
  validate(p);
  const double displaced = p.n_flows * 8.0 * p.b0_bytes / (p.q0 * p.c_bits_per_ms);
  return (displaced + 1.0) * overshoot_ms(p);
}

double qmax_cbq(const FluidParams& p) {
  validate(p);
  return overshoot_ms(p);
}

double qmax_confucius_series(const FluidParams& p) {
  validate(p);
  const double rk = std::sqrt(p.k);
  const double f0 = 2.0 * p.q0 + 6.0 * p.tau + 8.0 / (2.0 * rk);
  const double f1 = 10.0 / (3.0 * p.k) + 2.0 * p.q0 * p.tau + 2.0 * p.tau * p.tau +
                    4.0 * p.q0 / rk + 16.0 * p.tau / (3.0 * rk);
  const double f2 = 4.0 * p.q0 / p.k + 6.0 * p.tau / p.k + p.q0 * p.tau * p.tau +
                    p.tau * p.tau * p.tau + 6.0 * p.q0 * p.tau / rk +
                    11.0 * p.tau * p.tau / rk;
  return f0 + f1 * p.lambda + f2 * p.lambda * p.lambda;
}

double qmax_confucius_simplified(const FluidParams& p) {
  validate(p);
  return 6.0 * p.q0 + 15.0 * p.tau + 8.0 * p.lambda / p.k +
         (10.0 * p.q0 + 15.0 * p.tau) * p.lambda * p.lambda / p.k;
}

double qmax_confucius_transient(const FluidParams& p) {
  validate(p);
  // The envelope halves every 1/lambda, i.e. decays at lambda*ln2 in the
  // exponential form the zero-crossing expansion uses.
  const double lam_e = p.lambda * kLn2;
  const double c = p.c_bits_per_ms;
  const double t0 = t0_of(p.k, p.tau, lam_e, c);
  const double a = c * (p.k / 2.0) / (lam_e * lam_e + p.k * std::exp(lam_e * p.tau));
  const double b = c - a;
  // Sent bits: full rate until feedback at tau, then the decaying arc to t0.
  const double sent = p.q0 * c + c * p.tau + c * t0 - (lam_e * a / 2.0) * t0 * t0 -
                      (p.k * b / 6.0) * t0 * t0 * t0;
  const double served = c * confucius_rate_integral(p.lambda, p.n_flows, p.tau + t0);
  const double backlog = std::max(sent - served, 0.0);
  return backlog / (c * rate_norm(Policy::kConfucius, p, p.tau + t0));
}

double qmax_closed(Policy policy, const FluidParams& p) {
  switch (policy) {
    case Policy::kFq: return qmax_fq(p);
    case Policy::kFifo: return qmax_fifo(p);
    case Policy::kCbq: return qmax_cbq(p);
    case Policy::kConfucius: return qmax_confucius_transient(p);
  }
  return 0.0;
}

double t0_root(const FluidParams& p) {
  validate(p);
  return t0_of(p.k, p.tau, p.lambda, p.c_bits_per_ms);
}

double fct_delta(Policy policy, const FluidParams& p) {
  validate(p);
  const double n = p.n_flows;
  switch (policy) {
    case Policy::kFq:
      return 0.0;
    case Policy::kFifo:
      // True value is <= 0 (new bursts preempt the standing queue);
      // reported as the 0 lower bound.
      return 0.0;
    case Policy::kCbq:
      return (n - 1.0) * 8.0 * p.b_bytes / p.c_bits_per_ms;
    case Policy::kConfucius: {
      if (n < 1.0 || p.lambda <= 0.0) return 0.0;
      return (1.0 / p.lambda) *
             (0.5 - std::log2((n + 1.0) / 2.0) / n - 1.0 / (2.0 * n));
    }
  }
  return 0.0;
}

double fit_responsiveness(double probe_period_ms) {
  if (!(probe_period_ms > 0.0)) {
    throw std::invalid_argument("fit_responsiveness: period must be positive");
  }
  const double w = 2.0 * kPi / probe_period_ms;
  return w * w;
}

FluidSeries integrate_fluid(const FluidParams& p, Policy policy,
                            double t_end_ms, double dt_ms) {
  validate(p);
  if (!(t_end_ms > 0.0) || !(dt_ms > 0.0)) {
    throw std::invalid_argument("integrate_fluid: spans must be positive");
  }
  const double dt_cap = std::min(p.tau / 10.0, 0.01 / std::sqrt(p.k));
  if (dt_ms > dt_cap * (1.0 + 1e-9)) {
    throw std::invalid_argument("integrate_fluid: dt too coarse for tau/k");
  }

  const auto steps = static_cast<size_t>(std::ceil(t_end_ms / dt_ms));
  const auto delay_steps = static_cast<size_t>(std::llround(p.tau / dt_ms));
  const double c = p.c_bits_per_ms;

  FluidSeries out;
  out.t_ms.reserve(steps + 1);
  out.s_bits_per_ms.reserve(steps + 1);
  out.p_bits.reserve(steps + 1);
  out.q_ms.reserve(steps + 1);

  // Normalized state: sigma = s/C in [0,1], pi = p/C in ms.
  double sigma = 1.0;
  double pi = p.q0;
  std::vector<double> pi_hist;
  pi_hist.reserve(steps + 1);

  for (size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt_ms;
    const double rho = rate_norm(policy, p, t);
    const double q_rep = pi / rho;
    out.t_ms.push_back(t);
    out.s_bits_per_ms.push_back(sigma * c);
    out.p_bits.push_back(pi * c);
    out.q_ms.push_back(q_rep);
    out.q_max_ms = std::max(out.q_max_ms, q_rep);
    pi_hist.push_back(pi);

    // Feedback sees the backlog-at-capacity delay one tau ago; before the
    // arrival event that delay sat at the target.
    const double pi_delayed =
        (i >= delay_steps) ? pi_hist[i - delay_steps] : p.q0;
    const double next_pi = std::max(pi + dt_ms * (sigma - rho), 0.0);
    sigma = std::clamp(sigma - dt_ms * p.k * (pi_delayed - p.q0), 0.0, 1.0);
    pi = next_pi;
  }
  return out;
}

}  // namespace confsim::fluid
