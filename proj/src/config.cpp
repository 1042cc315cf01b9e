#include "isp/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "isp/common.hpp"

namespace isp {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
    throw ValidationError("config: invalid value '" + std::string(value) + "' for " +
                          std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        bad_value(key, value);
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value);
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view value) {
    std::vector<std::size_t> out;
    if (trim(value).empty()) {
        return out;
    }
    std::size_t start = 0;
    while (start <= value.size()) {
        const auto comma = value.find(',', start);
        const auto item = trim(value.substr(start, comma == std::string_view::npos
                                                       ? std::string_view::npos
                                                       : comma - start));
        out.push_back(parse_number<std::size_t>(key, item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys{
        "K",          "alpha",          "reassign_interval", "total_epochs",
        "warmup_epochs", "base_lr",     "warmup_start_lr",   "lr_decay_factor",
        "lr_decay_epochs", "batch_size", "margin",           "epsilon",
        "seed",       "bias",           "warm_start",        "early_stop",
        "loss_reduction"};
    return keys;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
    const auto value = trim(raw);
    if (key == "K") K = parse_number<std::size_t>(key, value);
    else if (key == "alpha") alpha = parse_number<double>(key, value);
    else if (key == "reassign_interval") reassign_interval = parse_number<std::size_t>(key, value);
    else if (key == "total_epochs") total_epochs = parse_number<std::size_t>(key, value);
    else if (key == "warmup_epochs") warmup_epochs = parse_number<std::size_t>(key, value);
    else if (key == "base_lr") base_lr = parse_number<double>(key, value);
    else if (key == "warmup_start_lr") warmup_start_lr = parse_number<double>(key, value);
    else if (key == "lr_decay_factor") lr_decay_factor = parse_number<double>(key, value);
    else if (key == "lr_decay_epochs") lr_decay_epochs = parse_list(key, value);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
    else if (key == "margin") margin = parse_number<double>(key, value);
    else if (key == "epsilon") epsilon = parse_number<double>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "bias") bias = parse_bool(key, value);
    else if (key == "warm_start") warm_start = parse_bool(key, value);
    else if (key == "early_stop") early_stop = parse_bool(key, value);
    else if (key == "loss_reduction") {
        if (value == "mean") loss_reduction = Reduction::Mean;
        else if (value == "sum") loss_reduction = Reduction::Sum;
        else bad_value(key, value);
    } else {
        throw ValidationError("config: unknown key '" + std::string(key) + "'");
    }
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "K=" << K << "\n"
       << "alpha=" << alpha << "\n"
       << "reassign_interval=" << reassign_interval << "\n"
       << "total_epochs=" << total_epochs << "\n"
       << "warmup_epochs=" << warmup_epochs << "\n"
       << "base_lr=" << base_lr << "\n"
       << "warmup_start_lr=" << warmup_start_lr << "\n"
       << "lr_decay_factor=" << lr_decay_factor << "\n"
       << "lr_decay_epochs=";
    for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
        os << (i ? "," : "") << lr_decay_epochs[i];
    }
    os << "\n"
       << "batch_size=" << batch_size << "\n"
       << "margin=" << margin << "\n"
       << "epsilon=" << epsilon << "\n"
       << "seed=" << seed << "\n"
       << "bias=" << (bias ? "true" : "false") << "\n"
       << "warm_start=" << (warm_start ? "true" : "false") << "\n"
       << "early_stop=" << (early_stop ? "true" : "false") << "\n"
       << "loss_reduction=" << (loss_reduction == Reduction::Mean ? "mean" : "sum") << "\n";
    return os.str();
}

LrSchedule RunConfig::schedule() const {
    return {base_lr, warmup_start_lr, warmup_epochs, lr_decay_factor, lr_decay_epochs,
            total_epochs};
}

TrainOptions RunConfig::train_options() const {
    TrainOptions opts;
    opts.batch_size = batch_size;
    opts.reduction = loss_reduction;
    return opts;
}

void RunConfig::validate() const {
    if (K < 2 || K > 254) throw ValidationError("config: K must be in [2, 254]");
    if (reassign_interval < 1) throw ValidationError("config: reassign_interval must be >= 1");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (alpha < 0.0) throw ValidationError("config: alpha must be >= 0");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw ValidationError("config: epsilon must be in [0, 1)");
    }
    schedule().validate();
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected key=value");
        }
        base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config: " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return parse_run_config(os.str(), std::move(base));
}

}  // namespace isp
