#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace confsim {

/* Randomized structural checks over the schedulers. Each suite runs many
 * independently seeded mini-scenarios and reports how many violated its
 * invariant; a healthy build reports zero failures everywhere. The suites are
 * shared between the unit tests and the release validation gate. */

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;  // empty when the suite is clean
};

std::vector<PropertyResult> run_property_suites(int cases_per_suite = 1000,
                                                uint64_t seed = 1);

}  // namespace confsim
