#include "confsim/link.hpp"

#include <algorithm>

namespace confsim {

double CapacityProfile::mean_bps(SimTime horizon_us) const {
  if (horizon_us <= 0) return static_cast<double>(steps_.front().bits_per_sec);
  double acc = 0.0;  // bits/sec weighted by us
  for (size_t i = 0; i < steps_.size(); i++) {
    SimTime lo = steps_[i].at_us;
    if (lo >= horizon_us) break;
    SimTime hi = (i + 1 < steps_.size()) ? std::min(steps_[i + 1].at_us, horizon_us)
                                         : horizon_us;
    if (hi > lo) acc += static_cast<double>(steps_[i].bits_per_sec) * (hi - lo);
  }
  return acc / static_cast<double>(horizon_us);
}

}  // namespace confsim
