#pragma once

#include <cstddef>
#include <vector>

namespace simcon {

// Step schedule for the positive-set threshold lambda. Epochs are 1-indexed
// and a boundary at epoch N means the decremented value takes effect at
// epoch N+1.
struct LambdaSchedule {
  double initial = 0.95;
  double step_decrement = 0.05;
  std::vector<std::size_t> decay_epochs = {2, 15};
  double floor = -1.0;
};

// Linear warmup from init_lr to max_lr over warmup_epochs, then cosine decay
// to min_lr over the remaining epochs. Rates are per optimizer step.
struct LrSchedule {
  double init_lr = 4e-6;
  double max_lr = 1.6e-3;
  std::size_t warmup_epochs = 2;
  std::size_t total_epochs = 30;
  double min_lr = 0.0;
};

double lambda_at_epoch(const LambdaSchedule& sched, std::size_t epoch);

double lr_at_step(const LrSchedule& sched, std::size_t step, std::size_t steps_per_epoch);

// Default decay boundaries for a horizon of total_epochs, scaled
// proportionally from the 30-epoch reference points {2, 15} and clamped to
// at least epoch 1.
std::vector<std::size_t> default_lambda_boundaries(std::size_t total_epochs);

}  // namespace simcon
