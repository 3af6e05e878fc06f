#include "simcon/schedules.hpp"

#include <algorithm>
#include <cmath>

namespace simcon {

double lambda_at_epoch(const LambdaSchedule& sched, std::size_t epoch) {
  std::size_t decays = 0;
  for (std::size_t boundary : sched.decay_epochs)
    if (boundary < epoch) ++decays;
  const double value = sched.initial - sched.step_decrement * static_cast<double>(decays);
  return std::max(value, sched.floor);
}

double lr_at_step(const LrSchedule& sched, std::size_t step, std::size_t steps_per_epoch) {
  const std::size_t warmup_steps = sched.warmup_epochs * steps_per_epoch;
  const std::size_t total_steps = sched.total_epochs * steps_per_epoch;
  if (warmup_steps > 0 && step <= warmup_steps) {
    const double t = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return sched.init_lr + (sched.max_lr - sched.init_lr) * t;
  }
  if (total_steps <= warmup_steps || step >= total_steps) return sched.min_lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  constexpr double kPi = 3.14159265358979323846;
  return sched.min_lr + 0.5 * (sched.max_lr - sched.min_lr) * (1.0 + std::cos(kPi * progress));
}

std::vector<std::size_t> default_lambda_boundaries(std::size_t total_epochs) {
  auto scale = [total_epochs](double reference) {
    const double scaled = reference * static_cast<double>(total_epochs) / 30.0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
  };
  return {scale(2.0), scale(15.0)};
}

}  // namespace simcon
