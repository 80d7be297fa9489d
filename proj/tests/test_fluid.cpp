#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "confsim/fluid.hpp"

using namespace confsim::fluid;

namespace {

FluidParams paper_like() {
  FluidParams p;
  p.k = 0.001;
  p.q0 = 10.0;
  p.tau = 40.0;
  p.lambda = 0.004;
  p.c_bits_per_ms = 25000.0;
  p.n_flows = 9.0;
  p.b_bytes = 15000.0;
  p.b0_bytes = 15000.0;
  return p;
}

}  // namespace

TEST_CASE("fq peak delay") {
  FluidParams p = paper_like();
  CHECK(qmax_fq(p) == doctest::Approx(718.33).epsilon(0.001));

  SUBCASE("exactly linear in N") {
    FluidParams d = p;
    for (double n : {1.0, 2.0, 7.0, 50.0}) {
      p.n_flows = n;
      d.n_flows = 2.0 * n;
      CHECK(qmax_fq(d) == doctest::Approx(2.0 * qmax_fq(p)).epsilon(1e-12));
    }
  }
  SUBCASE("stiff-sender limit drops the overshoot term") {
    p.k = 1e18;
    CHECK(qmax_fq(p) == doctest::Approx(9.0 * (10.0 + 40.0)).epsilon(1e-9));
  }
  SUBCASE("no competitors, no queue growth") {
    p.n_flows = 0.0;
    CHECK(qmax_fq(p) == 0.0);
  }
}

TEST_CASE("fifo peak delay lower bound") {
  FluidParams p = paper_like();
  // (9*120000/(10*25000) + 1) * 79.814
  CHECK(qmax_fifo(p) == doctest::Approx(424.61).epsilon(0.001));

  SUBCASE("burst-free arrivals collapse to the shared constant") {
    p.b0_bytes = 0.0;
    CHECK(qmax_fifo(p) == doctest::Approx(qmax_cbq(p)).epsilon(1e-12));
  }
  SUBCASE("linear in N*B0") {
    FluidParams d = p;
    d.n_flows = 2.0 * p.n_flows;
    const double extra = qmax_fifo(p) - qmax_cbq(p);
    CHECK(qmax_fifo(d) - qmax_cbq(d) == doctest::Approx(2.0 * extra).epsilon(1e-9));
  }
}

TEST_CASE("cbq peak delay") {
  FluidParams p = paper_like();
  CHECK(qmax_cbq(p) == doctest::Approx(79.81).epsilon(0.001));

  SUBCASE("independent of N") {
    FluidParams a = p, b = p;
    a.n_flows = 2.0;
    b.n_flows = 100.0;
    CHECK(qmax_cbq(a) == qmax_cbq(b));
  }
  SUBCASE("fq with a single competitor is the same bound") {
    p.n_flows = 1.0;
    CHECK(qmax_fq(p) == doctest::Approx(qmax_cbq(p)).epsilon(1e-12));
  }
}

TEST_CASE("ramp-aware series and simplified forms") {
  FluidParams p = paper_like();
  p.q0 = 1.0;
  CHECK(qmax_confucius_simplified(p) == doctest::Approx(647.76).epsilon(0.001));

  SUBCASE("zero ramp rate reduces the simplified form") {
    p.lambda = 0.0;
    CHECK(qmax_confucius_simplified(p) ==
          doctest::Approx(6.0 * p.q0 + 15.0 * p.tau).epsilon(1e-12));
  }
  SUBCASE("simplified dominates series at the operating ramp rate") {
    // The dominance claim needs 1/sqrt(k) small against q0+tau; it fails for
    // softer senders or a zero ramp (k=0.0004, q0=1, tau=20, lambda=0 gives
    // 306 < 322). Checked over the supported operating grid.
    p.lambda = 0.004;
    for (double k : {0.0004, 0.001}) {
      for (double q0 : {1.0, 5.0, 10.0}) {
        for (double tau : {20.0, 40.0}) {
          p.k = k;
          p.q0 = q0;
          p.tau = tau;
          CAPTURE(k);
          CAPTURE(q0);
          CAPTURE(tau);
          CHECK(qmax_confucius_simplified(p) >= qmax_confucius_series(p));
        }
      }
    }
  }
  SUBCASE("series is an exact quadratic in the ramp rate") {
    p = paper_like();
    const double h = 0.002;
    auto at = [&](double lam) {
      FluidParams q = p;
      q.lambda = lam;
      return qmax_confucius_series(q);
    };
    // third finite difference of a quadratic vanishes
    const double d3 = at(3 * h) - 3 * at(2 * h) + 3 * at(h) - at(0.0);
    CHECK(std::abs(d3) < 1e-6);
    // constant term matches the printed leading coefficient
    const double f0 = 2.0 * p.q0 + 6.0 * p.tau + 4.0 / std::sqrt(p.k);
    CHECK(at(0.0) == doctest::Approx(f0).epsilon(1e-12));
  }
}

TEST_CASE("service-rate zero crossing") {
  FluidParams p = paper_like();
  p.c_bits_per_ms = 1.0;

  // golden value, frozen from direct evaluation at k=0.001, tau=40, lambda=0.004
  CHECK(t0_root(p) == doctest::Approx(55.9105).epsilon(0.0005));

  SUBCASE("capacity cancels") {
    FluidParams big = p;
    big.c_bits_per_ms = 25000.0;
    CHECK(t0_root(big) == doctest::Approx(t0_root(p)).epsilon(1e-12));
  }
  SUBCASE("vanishing ramp recovers the quadratic root 2/sqrt(k)") {
    p.lambda = 1e-9;
    CHECK(t0_root(p) == doctest::Approx(2.0 / std::sqrt(p.k)).epsilon(1e-4));
  }
  SUBCASE("faster ramps close the loop earlier") {
    double prev = 1e30;
    for (double lam : {0.001, 0.002, 0.004, 0.008, 0.016}) {
      p.lambda = lam;
      const double t0 = t0_root(p);
      CHECK(t0 < prev);
      CHECK(t0 > 0.0);
      prev = t0;
    }
  }
}

TEST_CASE("fct penalty over fair queueing") {
  FluidParams p = paper_like();
  CHECK(fct_delta(Policy::kFq, p) == 0.0);
  CHECK(fct_delta(Policy::kFifo, p) == 0.0);
  // (N-1)*B/C = 8 * 120000 bits / 25000 bits-per-ms
  CHECK(fct_delta(Policy::kCbq, p) == doctest::Approx(38.4).epsilon(1e-9));

  SUBCASE("ramped scheduler penalty stays under the ceiling") {
    const double bound = std::log2(std::exp(1.0)) / p.lambda;
    CHECK(bound == doctest::Approx(360.674).epsilon(0.001));
    for (double n = 1.0; n <= 200.0; n += 1.0) {
      p.n_flows = n;
      const double d = fct_delta(Policy::kConfucius, p);
      CHECK(d <= bound);
    }
    // The exact expression dips slightly negative for two new flows (they
    // finish marginally ahead of fair queueing); only the ceiling is claimed.
    p.n_flows = 2.0;
    CHECK(fct_delta(Policy::kConfucius, p) == doctest::Approx(-10.62).epsilon(0.01));
  }
  SUBCASE("a single new flow pays nothing") {
    p.n_flows = 1.0;
    CHECK(fct_delta(Policy::kConfucius, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("shared-class penalty grows without bound in B") {
    FluidParams big = p;
    big.b_bytes = 100.0 * p.b_bytes;
    CHECK(fct_delta(Policy::kCbq, big) ==
          doctest::Approx(100.0 * fct_delta(Policy::kCbq, p)).epsilon(1e-12));
  }
}

TEST_CASE("responsiveness from probe period") {
  CHECK(fit_responsiveness(200.0) == doctest::Approx(0.000986960).epsilon(1e-6));
  CHECK(fit_responsiveness(320.0) == doctest::Approx(0.000385531).epsilon(1e-6));
  CHECK(fit_responsiveness(400.0) ==
        doctest::Approx(fit_responsiveness(200.0) / 4.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_responsiveness(0.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_responsiveness(-5.0), std::invalid_argument);
}

TEST_CASE("integrator equilibrium with no competitors") {
  FluidParams p = paper_like();
  p.n_flows = 0.0;
  const auto series = integrate_fluid(p, Policy::kFq, 500.0, 0.1);
  CHECK(series.q_max_ms == doctest::Approx(p.q0).epsilon(1e-9));
  for (double q : series.q_ms) CHECK(q == doctest::Approx(p.q0).epsilon(1e-9));
}

TEST_CASE("integrator tracks the fq closed form") {
  FluidParams p = paper_like();
  const auto series = integrate_fluid(p, Policy::kFq, 1200.0, 0.05);
  const double closed = qmax_fq(p);
  CHECK(series.q_max_ms == doctest::Approx(closed).epsilon(0.20));
}

TEST_CASE("integrator step refinement converges") {
  FluidParams p = paper_like();
  const double coarse = integrate_fluid(p, Policy::kFq, 1200.0, 0.1).q_max_ms;
  const double fine = integrate_fluid(p, Policy::kFq, 1200.0, 0.05).q_max_ms;
  CHECK(std::abs(coarse - fine) / fine < 0.01);
}

TEST_CASE("integrator rejects coarse steps") {
  FluidParams p = paper_like();
  CHECK_THROWS_AS(integrate_fluid(p, Policy::kFq, 100.0, 5.0), std::invalid_argument);
  // within tau/10 but beyond 0.01/sqrt(k) = 0.316 ms
  CHECK_THROWS_AS(integrate_fluid(p, Policy::kFq, 100.0, 0.35), std::invalid_argument);
  CHECK_THROWS_AS(integrate_fluid(p, Policy::kFq, -1.0, 0.1), std::invalid_argument);
}

TEST_CASE("peak-delay ordering across policies") {
  FluidParams p = paper_like();
  for (double q0 : {1.0, 5.0, 10.0}) {
    for (double n : {5.0, 9.0, 50.0}) {
      p.q0 = q0;
      p.n_flows = n;
      const double cbq = qmax_cbq(p);
      const double ramp = qmax_confucius_transient(p);
      const double fq = qmax_fq(p);
      CHECK(cbq < ramp);
      CHECK(ramp < fq);
    }
  }
}

TEST_CASE("peak-delay scaling laws") {
  FluidParams p = paper_like();
  SUBCASE("ramped and shared-class forms ignore N") {
    FluidParams base = p;
    base.n_flows = 2.0;
    const double ramp0 = qmax_confucius_transient(base);
    const double cbq0 = qmax_cbq(base);
    for (double n = 3.0; n <= 100.0; n += 1.0) {
      p.n_flows = n;
      CHECK(qmax_confucius_transient(p) == doctest::Approx(ramp0).epsilon(1e-12));
      CHECK(qmax_cbq(p) == doctest::Approx(cbq0).epsilon(1e-12));
    }
  }
}

TEST_CASE("closed forms agree with the integrator") {
  // 3x3x3 grid. Every closed form describes the arrival transient, so the
  // ramped policy is integrated to just past its first delay peak: with a
  // decaying service envelope the undamped oscillation makes later peaks
  // larger, which is outside what the transient forms model. Constant-rate
  // policies are horizon-insensitive and get a long horizon.
  FluidParams p = paper_like();
  for (double k : {0.0002, 0.0004, 0.001}) {
    for (double q0 : {1.0, 5.0, 10.0}) {
      for (double n : {2.0, 9.0, 50.0}) {
        p.k = k;
        p.q0 = q0;
        p.n_flows = n;
        CAPTURE(k);
        CAPTURE(q0);
        CAPTURE(n);
        const double dt = 0.05;
        const double transient_end = p.tau + (2.0 + 3.15) / std::sqrt(k);
        for (Policy pol : {Policy::kFq, Policy::kCbq, Policy::kConfucius}) {
          const double horizon = pol == Policy::kConfucius ? transient_end : 1800.0;
          const double integ = integrate_fluid(p, pol, horizon, dt).q_max_ms;
          const double closed = qmax_closed(pol, p);
          CAPTURE(doctest::String(policy_name(pol)));
          CHECK(std::abs(closed - integ) / integ <= 0.25);
        }
        // The shared-queue form lower-bounds true FIFO dynamics, which queue
        // the competing bursts themselves; the rate-share integrator omits
        // those bytes, so the closed value sits at or above it in every cell.
        const double fifo_int = integrate_fluid(p, Policy::kFifo, 1800.0, dt).q_max_ms;
        CHECK(qmax_fifo(p) >= fifo_int * (1.0 - 1e-9));
        // published bound chain for the ramped scheduler, at the transient peak
        const double conf_int =
            integrate_fluid(p, Policy::kConfucius, transient_end, dt).q_max_ms;
        CHECK(qmax_confucius_series(p) >= conf_int);
      }
    }
  }
}

TEST_CASE("parameter warnings") {
  FluidParams p = paper_like();
  p.tau = 2.0;
  p.lambda = 0.004;
  CHECK(param_warnings(p).empty());
  p.tau = 40.0;  // tau*sqrt(k) = 1.26
  CHECK(param_warnings(p).size() == 1);
  p.lambda = 0.05;
  CHECK(param_warnings(p).size() == 2);
}

TEST_CASE("parameter validation") {
  FluidParams p = paper_like();
  p.k = 0.0;
  CHECK_THROWS_AS(qmax_fq(p), std::invalid_argument);
  p = paper_like();
  p.q0 = -1.0;
  CHECK_THROWS_AS(qmax_cbq(p), std::invalid_argument);
  p = paper_like();
  p.lambda = -0.004;
  CHECK_THROWS_AS(qmax_confucius_series(p), std::invalid_argument);
  CHECK_THROWS_AS(policy_from_name("wfq"), std::invalid_argument);
  CHECK(policy_from_name("confucius") == Policy::kConfucius);
}
