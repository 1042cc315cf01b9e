#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isp/kmeans.hpp"
#include "isp/tensor.hpp"

namespace isp {

using PseudoLabelMap = LabelMap;

enum class ClusterWarningKind {
    UniformActivation,  // stage 1 could not split; everything is foreground
    ReducedParts,       // stage 2 found fewer distinct directions than K-1
    EmptyForeground,    // no usable foreground pixel for stage 2
};

struct ClusterWarning {
    std::uint32_t person_id = 0;
    ClusterWarningKind kind{};
    std::string message;
};

/// Raw stage-2 cluster index -> semantic label, ordered top to bottom.
struct PartOrdering {
    std::uint32_t person_id = 0;
    std::vector<std::uint8_t> label_of_cluster;  // values in 1..K-1
    std::vector<double> mean_row;                // per raw cluster
    std::vector<double> mean_col;
};

struct ForegroundSplit {
    std::vector<std::size_t> images;               // indices into the set
    std::vector<std::vector<std::uint8_t>> masks;  // one h*w mask per image, 1 = foreground
    ClusterModel model;
    bool uniform = false;
};

/// Pools the activations of every pixel of every image of one person and
/// splits them with 2-means; the larger centroid is foreground.
ForegroundSplit stage1_foreground_split(const FeatureMapSet& set, std::uint32_t person_id,
                                        std::uint64_t seed);

struct PartSplit {
    std::vector<std::size_t> images;
    // Per image, per pixel: raw cluster index, or -1 for pixels that are not
    // stage-2 samples (background or zero-norm).
    std::vector<std::vector<int>> raw;
    PartOrdering ordering;
    ClusterModel model;
    bool reduced = false;
};

/// Builds the stage-2 samples: unit direction vectors of the foreground
/// pixels, pooled over all of the person's images in set order. Zero-norm
/// pixels are skipped.
struct Stage2Samples {
    SampleMatrix samples;
    std::vector<std::size_t> image_slot;  // which entry of `images` each sample came from
    std::vector<std::size_t> pixel;
};
Stage2Samples stage2_samples(const FeatureMapSet& set, const ForegroundSplit& fg);

/// Clusters foreground directions into K-1 parts and orders them by mean row.
/// `warm_start` (k×c centroids) replaces k-means++ seeding when its cluster
/// count matches. Throws DegenerateInputError when there is no sample.
PartSplit stage2_part_split(const FeatureMapSet& set, std::uint32_t person_id,
                            const ForegroundSplit& fg, std::size_t K, std::uint64_t seed,
                            const std::optional<std::vector<double>>& warm_start = std::nullopt);

struct PseudoLabelOptions {
    std::size_t K = 6;
    std::uint64_t seed = 0;
    // Stage-2 centroids of a previous round keyed by person_id.
    const std::map<std::uint32_t, std::vector<double>>* warm_start = nullptr;
};

struct PseudoLabelResult {
    std::vector<PseudoLabelMap> labels;  // one per map, in set order
    std::vector<ClusterWarning> warnings;
    std::map<std::uint32_t, std::vector<double>> part_centroids;
    std::map<std::uint32_t, PartOrdering> orderings;
    // Stage-1 masks in set order; kept for evaluation.
    std::vector<std::vector<std::uint8_t>> foreground;

    LabelSet as_label_set(std::size_t K) const { return {K, labels}; }
};

/// Cascaded clustering of every identity, independently and in parallel.
/// Per-identity problems become warnings; the call itself only fails on
/// invalid input.
PseudoLabelResult generate_pseudo_labels(const FeatureMapSet& set,
                                         const PseudoLabelOptions& opts);

std::string to_string(ClusterWarningKind kind);

}  // namespace isp
