#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "isp/tensor.hpp"

namespace isp {

/// Generator settings. The default geometry is a 256×128 input at 1/4 scale.
struct SyntheticSpec {
    std::size_t n_id = 8;
    std::size_t imgs_per_id = 6;
    std::size_t c = 16;
    std::size_t h = 64;
    std::size_t w = 32;
    std::size_t parts = 5;
    double occlusion_prob = 0.0;  // per (image, part)
    // Noise vectors have RMS norm noise_sigma, the scale of the unit signatures.
    double noise_sigma = 0.5;
    double fg_gain = 4.0;
    // Part signatures are normalize(prototype_p + identity_spread * u) with a
    // per-identity random unit u; 0 makes every identity share the
    // prototypes.
    double identity_spread = 0.5;
    std::size_t cameras = 2;  // camera_id = image index within identity mod cameras
    std::uint64_t seed = 0;

    void validate() const;
};

struct BandLayout {
    std::size_t top = 0;     // first silhouette row
    std::size_t bottom = 0;  // last silhouette row (inclusive)
    std::vector<std::size_t> band_start;  // parts + 1 entries; band p = [start[p], start[p+1])
    std::vector<std::uint8_t> silhouette; // h*w, 1 inside the ellipse
};

/// Throws ValidationError if the bands do not fit in h.
BandLayout band_layout(const SyntheticSpec& spec);

struct SyntheticData {
    FeatureMapSet set;
    LabelSet truth;  // K = parts + 1; occluded parts erased to background
    std::vector<std::vector<std::uint8_t>> occluded;  // per image, per part (index p-1)
    std::vector<std::vector<double>> signatures;      // per identity, parts×c
};

SyntheticData generate(const SyntheticSpec& spec);

}  // namespace isp
