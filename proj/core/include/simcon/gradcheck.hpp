#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace simcon {

struct GradSuiteResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t coordinates = 0;
  double worst_rel = 0.0;
  double worst_abs = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradSuiteResult> suites;
  bool pass = true;
};

// Central finite differences (h = 1e-5) against the analytic gradients of
// every loss and of the full encoder + head composition, over randomized
// instances with |B| <= 8 and d <= 16 (the first instance of each suite is
// pinned to |B| = 1). Differentiation is done in the raw (unnormalized)
// embedding coordinates, with positive masks and stop-gradient targets
// frozen at the base point: that is the function whose gradient the losses
// report. inject_fault corrupts one analytic gradient to prove the harness
// can fail.
GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances_per_loss = 20,
                              bool inject_fault = false);

}  // namespace simcon
