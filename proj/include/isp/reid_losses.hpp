#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "isp/kmeans.hpp"
#include "isp/parsing_head.hpp"

namespace isp {

/// Linear identity classifier used by the smoothed cross-entropy term.
/// V is n_id×dim; class indices are positions in `classes`.
struct IdHead {
    std::size_t n_id = 0;
    std::size_t dim = 0;
    std::vector<double> V;
    std::vector<std::uint32_t> classes;  // person_id of each row

    static IdHead zeros(std::size_t n_id, std::size_t dim);
    // Rows are the l2-normalized per-identity means of `feats`, times scale.
    static IdHead from_class_means(const SampleMatrix& feats, std::span<const std::uint32_t> ids,
                                   double scale);

    // Row index of a person id; throws ValidationError if absent.
    std::size_t class_of(std::uint32_t person_id) const;
};

struct LossReport {
    double l_p = 0.0;
    double l_f = 0.0;
    double l_g = 0.0;
    double l_parsing = 0.0;
    double alpha = 0.1;
    double total = 0.0;
};

/// Batch-hard triplet loss with Euclidean distance: mean over anchors that
/// have both a positive and a negative of max(0, hardest_pos - hardest_neg +
/// margin). Throws DegenerateInputError when no anchor qualifies.
double triplet_loss(const SampleMatrix& feats, std::span<const std::uint32_t> ids, double margin);

/// Mean cross-entropy of softmax(V f) against (1 - eps) one-hot + eps / n_id.
/// `labels` are row indices into the head.
double smoothed_ce(const IdHead& head, const SampleMatrix& feats,
                   std::span<const std::size_t> labels, double epsilon);

struct ReidHeads {
    IdHead part;  // over F_1..F_{K-1} concatenated
    IdHead fg;
    IdHead global;
};

/// Feature matrices for the three representations of a descriptor batch.
struct ReidFeatures {
    SampleMatrix part;
    SampleMatrix fg;
    SampleMatrix global;
    std::vector<std::uint32_t> ids;
};
ReidFeatures reid_features(std::span<const Descriptor> descs);

LossReport combine_losses(double l_p, double l_f, double l_g, double alpha, double l_parsing);

/// Each group loss is triplet + smoothed CE on its representation; total =
/// l_p + l_f + l_g + alpha * l_parsing.
LossReport reid_objective(std::span<const Descriptor> descs, const ReidHeads& heads,
                          double margin, double epsilon, double alpha, double l_parsing);

}  // namespace isp
