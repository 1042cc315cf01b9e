#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace isp {

/// One image's c×h×w feature map. Storage is row-major with the channel
/// index fastest: element (row, col, ch) lives at ((row * w) + col) * c + ch.
/// Coordinates follow (x, y) = (col, row); row 0 is the top of the image.
struct FeatureMap {
    std::uint32_t image_id = 0;
    std::uint32_t person_id = 0;
    std::uint32_t camera_id = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<float> data;

    std::size_t pixels() const { return h * w; }
    std::span<const float> pixel(std::size_t row, std::size_t col) const {
        return {data.data() + (row * w + col) * c, c};
    }
    std::span<const float> pixel(std::size_t index) const {
        return {data.data() + index * c, c};
    }
    std::span<float> pixel(std::size_t index) { return {data.data() + index * c, c}; }

    // Throws ValidationError on shape mismatch or non-finite payload.
    void validate() const;
};

/// Batch of feature maps sharing one (c, h, w).
struct FeatureMapSet {
    std::vector<FeatureMap> maps;

    std::size_t n() const { return maps.size(); }
    std::size_t n_id() const;
    std::size_t c() const { return maps.empty() ? 0 : maps.front().c; }
    std::size_t h() const { return maps.empty() ? 0 : maps.front().h; }
    std::size_t w() const { return maps.empty() ? 0 : maps.front().w; }

    // Distinct person ids in ascending order.
    std::vector<std::uint32_t> person_ids() const;
    // Indices into maps for one person, in set order.
    std::vector<std::size_t> images_of(std::uint32_t person_id) const;

    void validate() const;
};

/// Per-pixel activation ||M(x,y)|| normalized by the image maximum.
struct ActivationMap {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> values;
};

/// Per-pixel l2-normalized feature vectors. Zero pixels keep the zero vector
/// and are flagged in `degenerate`.
struct DirectionMap {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 0;
    std::vector<double> vectors;
    std::vector<std::uint8_t> degenerate;

    std::span<const double> at(std::size_t index) const {
        return {vectors.data() + index * c, c};
    }
};

/// Throws DegenerateInputError if every pixel has zero norm.
ActivationMap activation_map(const FeatureMap& m);
DirectionMap direction_map(const FeatureMap& m);

// l2 norm of one pixel, accumulated in double.
double pixel_norm(std::span<const float> v);

inline constexpr std::uint8_t kUnlabeled = 255;

/// Per-pixel part labels in {0..K-1}; 0 is background, 255 is unlabeled.
/// Used for pseudo-labels, classifier predictions and ground truth alike.
struct LabelMap {
    std::uint32_t image_id = 0;
    std::uint32_t person_id = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<std::uint8_t> labels;
};

struct LabelSet {
    std::size_t K = 0;
    std::vector<LabelMap> maps;

    void validate() const;
};

FeatureMapSet load_feature_set(const std::filesystem::path& path);
void save_feature_set(const FeatureMapSet& set, const std::filesystem::path& path);

LabelSet load_label_set(const std::filesystem::path& path);
void save_label_set(const LabelSet& set, const std::filesystem::path& path);

}  // namespace isp
