#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "isp/parsing_head.hpp"
#include "isp/schedule.hpp"

namespace isp {

/// Settings of one clustering/training run. Field names double as config
/// file keys; CLI flags use the same names in kebab-case.
struct RunConfig {
    std::size_t K = 6;
    double alpha = 0.1;
    std::size_t reassign_interval = 1;
    std::size_t total_epochs = 120;
    std::size_t warmup_epochs = 10;
    double base_lr = 3.5e-4;
    double warmup_start_lr = 3.5e-5;
    double lr_decay_factor = 0.1;
    std::vector<std::size_t> lr_decay_epochs{40, 70};
    std::size_t batch_size = 64;
    double margin = 0.3;
    double epsilon = 0.1;
    std::uint64_t seed = 0;

    bool bias = true;         // per-part bias in the classifier
    bool warm_start = true;   // stage-2 centroids carried across rounds
    bool early_stop = false;  // stop once labels change on < 0.1% of pixels
    Reduction loss_reduction = Reduction::Mean;

    LrSchedule schedule() const;
    TrainOptions train_options() const;
    void validate() const;

    /// Sets one field from its textual value; throws ValidationError for an
    /// unknown key or unparsable value.
    void set(std::string_view key, std::string_view value);
    /// key=value lines, one per field, in declaration order.
    std::string to_text() const;
};

/// Every config key in declaration order.
const std::vector<std::string>& run_config_keys();

/// Parses `key=value` lines. Blank lines and lines starting with '#' are
/// skipped; unknown keys are errors.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace isp
