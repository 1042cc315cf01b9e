#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isp/matching.hpp"
#include "isp/tensor.hpp"

namespace isp {

struct RetrievalMetrics {
    std::vector<double> cmc;  // cmc[r-1] = CMC at rank r, r = 1..g
    double map = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // queries without any valid match
};

/// Market-1501 protocol: gallery entries sharing the query's person_id and
/// camera_id are dropped; ranking is by ascending distance, ties by gallery
/// index. Throws ValidationError if no query has a valid match.
RetrievalMetrics cmc_map(const DistanceMatrix& dm);

struct IouMetrics {
    std::map<int, double> per_part;  // every label with nonzero union, incl. 0
    double mean_iou = 0.0;           // over labels >= 1 present in pred or truth
    double fg_iou = 0.0;             // on label > 0 masks
};

/// IoU accumulated over all pixels of all images. Images are paired by
/// image_id. Truth pixels marked 255 are ignored. `group` optionally remaps
/// labels (index = raw label, value = group label) on both sides.
IouMetrics parsing_iou(std::span<const LabelMap> pred, std::span<const LabelMap> truth,
                       std::size_t K, const std::vector<std::uint8_t>* group = nullptr);

struct MetricReport {
    std::optional<RetrievalMetrics> retrieval;
    std::optional<IouMetrics> iou;

    std::string to_text() const;
    // One `key=value` per line.
    std::string to_key_values() const;
};

}  // namespace isp
