#include "isp/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isp/common.hpp"

namespace isp {

void LrSchedule::validate() const {
    if (total_epochs == 0) {
        throw ValidationError("schedule: total_epochs must be >= 1");
    }
    if (!(base_lr > 0.0) || !(warmup_start_lr > 0.0) || !(decay_factor > 0.0)) {
        throw ValidationError("schedule: learning rates and decay factor must be positive");
    }
    for (std::size_t i = 0; i < decay_epochs.size(); ++i) {
        if (decay_epochs[i] >= total_epochs || (i > 0 && decay_epochs[i] <= decay_epochs[i - 1])) {
            throw ValidationError(
                "schedule: decay epochs must be strictly increasing and < total_epochs");
        }
    }
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
    if (epoch >= schedule.total_epochs) {
        throw ValidationError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                              std::to_string(schedule.total_epochs) + ")");
    }
    if (epoch < schedule.warmup_epochs) {
        const double t = static_cast<double>(epoch) / static_cast<double>(schedule.warmup_epochs);
        return schedule.warmup_start_lr + t * (schedule.base_lr - schedule.warmup_start_lr);
    }
    const auto passed = static_cast<int>(
        std::count_if(schedule.decay_epochs.begin(), schedule.decay_epochs.end(),
                      [&](std::size_t d) { return d <= epoch; }));
    if (passed == 0) {
        return schedule.base_lr;
    }
    // Dividing by the reciprocal keeps 3.5e-4 * 0.1 at exactly 3.5e-5.
    return schedule.base_lr / std::pow(1.0 / schedule.decay_factor, passed);
}

}  // namespace isp
