#pragma once

#include <cstddef>
#include <vector>

namespace isp {

/// Warmup-then-step learning rate: linear from warmup_start_lr to base_lr
/// over warmup_epochs, then base_lr scaled by decay_factor once for every
/// decay epoch already reached.
struct LrSchedule {
    double base_lr = 3.5e-4;
    double warmup_start_lr = 3.5e-5;
    std::size_t warmup_epochs = 10;
    double decay_factor = 0.1;
    std::vector<std::size_t> decay_epochs{40, 70};
    std::size_t total_epochs = 120;

    static LrSchedule constant(double lr, std::size_t total_epochs) {
        return {lr, lr, 0, 1.0, {}, total_epochs};
    }

    void validate() const;
};

/// Throws ValidationError for epoch >= total_epochs.
double lr_at(const LrSchedule& schedule, std::size_t epoch);

}  // namespace isp
