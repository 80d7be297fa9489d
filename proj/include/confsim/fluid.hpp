#pragma once

#include <string>
#include <vector>

namespace confsim::fluid {

// Continuous-time single-bottleneck model of one responsive flow reacting to
// N new flows that arrive at t=0 and are scheduled by one of four policies.
// Internal unit system: ms / bits / bits-per-ms. B and B0 are bytes at the
// interface (converted to bits where used, matching how sizes arrive from
// scenarios).
struct FluidParams {
  double k = 0.001;       // sender responsiveness, ms^-2
  double q0 = 5.0;        // sender delay target, ms
  double tau = 40.0;      // feedback loop delay, ms
  double lambda = 0.004;  // scheduler ramp rate, ms^-1 (weight doubles every 1/lambda)
  double c_bits_per_ms = 25000.0;  // bottleneck capacity (25 Mbps default)
  double n_flows = 9.0;            // competing new flows
  double b_bytes = 15000.0;        // per-flow transfer size
  double b0_bytes = 15000.0;       // per-flow initial burst
};

enum class Policy { kFq, kFifo, kCbq, kConfucius };

Policy policy_from_name(const std::string& name);  // throws std::invalid_argument
const char* policy_name(Policy p);

// Non-fatal modeling caveats for these params (empty when none apply).
// The quadratic service-rate expansion needs tau well inside one probe
// period; the series expansion needs a small ramp rate.
std::vector<std::string> param_warnings(const FluidParams& p);

// Peak queueing delay seen by the responsive flow, per policy.
double qmax_fq(const FluidParams& p);
// Lower bound only (the derivation drops positive terms); callers that
// report it should carry a bound flag. See fct_delta for the same caveat.
double qmax_fifo(const FluidParams& p);
double qmax_cbq(const FluidParams& p);

// Ramp-aware scheduler forms. The series/simplified pair are the published
// small-lambda expansions (simplified >= series by construction); the
// transient form evaluates the peak directly at the service-rate zero
// crossing and is the one comparable to the integrator.
double qmax_confucius_series(const FluidParams& p);
double qmax_confucius_simplified(const FluidParams& p);
double qmax_confucius_transient(const FluidParams& p);

// Dispatch used by the analyze pipeline: FQ/FIFO/CBQ closed forms,
// Confucius -> transient form.
double qmax_closed(Policy policy, const FluidParams& p);

// Root of the quadratic service-rate expansion s(t)=0 past tau, measured
// from tau. Throws std::domain_error when the expansion degenerates.
double t0_root(const FluidParams& p);

// Mean FCT penalty over FQ for the N new flows. FIFO's true value is <= 0;
// reported as 0 (lower-bound flag lives with the caller, as for qmax_fifo).
double fct_delta(Policy policy, const FluidParams& p);

// Responsiveness from an observed steady-state probe period: k = (2*pi/T)^2.
double fit_responsiveness(double probe_period_ms);

struct FluidSeries {
  std::vector<double> t_ms;
  std::vector<double> s_bits_per_ms;  // sending rate
  std::vector<double> p_bits;         // backlog
  std::vector<double> q_ms;           // queueing delay at the allocated rate, p/r
  double q_max_ms = 0.0;
};

// Fixed-step integration of ds/dt = -k*(p(t-tau)/C - q0) with p' = s - r(t)
// and the policy's service-rate envelope r. Sender state is clamped to
// [0, C] and backlog to >= 0. History before t=0 is the pre-arrival
// equilibrium (s=C, p=q0*C). Throws std::invalid_argument when dt violates
// dt <= tau/10 and dt <= 0.01/sqrt(k), or on non-positive spans.
FluidSeries integrate_fluid(const FluidParams& p, Policy policy,
                            double t_end_ms, double dt_ms);

}  // namespace confsim::fluid
