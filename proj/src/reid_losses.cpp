#include "isp/reid_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "isp/common.hpp"

namespace isp {

IdHead IdHead::zeros(std::size_t n_id, std::size_t dim) {
    IdHead h;
    h.n_id = n_id;
    h.dim = dim;
    h.V.assign(n_id * dim, 0.0);
    for (std::size_t i = 0; i < n_id; ++i) {
        h.classes.push_back(static_cast<std::uint32_t>(i));
    }
    return h;
}

IdHead IdHead::from_class_means(const SampleMatrix& feats, std::span<const std::uint32_t> ids,
                                double scale) {
    if (feats.size() != ids.size() || feats.size() == 0) {
        throw ValidationError("IdHead::from_class_means: feature/id count mismatch");
    }
    std::map<std::uint32_t, std::pair<std::vector<double>, std::size_t>> acc;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& [sum, n] = acc[ids[i]];
        sum.resize(feats.dim, 0.0);
        const auto x = feats.row(i);
        for (std::size_t d = 0; d < feats.dim; ++d) sum[d] += x[d];
        ++n;
    }
    IdHead h;
    h.n_id = acc.size();
    h.dim = feats.dim;
    for (auto& [id, entry] : acc) {
        auto& sum = entry.first;
        double norm = 0.0;
        for (double v : sum) norm += v * v;
        norm = std::sqrt(norm);
        for (double v : sum) h.V.push_back(norm > 0.0 ? scale * v / norm : 0.0);
        h.classes.push_back(id);
    }
    return h;
}

std::size_t IdHead::class_of(std::uint32_t person_id) const {
    const auto it = std::find(classes.begin(), classes.end(), person_id);
    if (it == classes.end()) {
        throw ValidationError("IdHead: person_id " + std::to_string(person_id) + " has no class");
    }
    return static_cast<std::size_t>(it - classes.begin());
}

double triplet_loss(const SampleMatrix& feats, std::span<const std::uint32_t> ids, double margin) {
    const std::size_t n = feats.size();
    if (ids.size() != n) {
        throw ValidationError("triplet_loss: feature/id count mismatch");
    }
    std::vector<double> dist(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            dist[i * n + j] = std::sqrt(squared_distance(feats.row(i), feats.row(j)));
        }
    }
    double sum = 0.0;
    std::size_t anchors = 0;
    for (std::size_t a = 0; a < n; ++a) {
        double hardest_pos = -1.0;
        double hardest_neg = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a) continue;
            if (ids[j] == ids[a]) {
                hardest_pos = std::max(hardest_pos, dist[a * n + j]);
            } else {
                hardest_neg = std::min(hardest_neg, dist[a * n + j]);
            }
        }
        if (hardest_pos < 0.0 || std::isinf(hardest_neg)) {
            continue;
        }
        sum += std::max(0.0, hardest_pos - hardest_neg + margin);
        ++anchors;
    }
    if (anchors == 0) {
        throw DegenerateInputError(
            "triplet_loss: batch needs an identity with two samples and a second identity");
    }
    return sum / static_cast<double>(anchors);
}

double smoothed_ce(const IdHead& head, const SampleMatrix& feats,
                   std::span<const std::size_t> labels, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw ValidationError("smoothed_ce: epsilon must be in [0, 1)");
    }
    if (feats.dim != head.dim || feats.size() != labels.size() || labels.empty()) {
        throw ValidationError("smoothed_ce: shape mismatch");
    }
    const std::size_t n_id = head.n_id;
    std::vector<double> logits(n_id);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_id) {
            throw ValidationError("smoothed_ce: label " + std::to_string(labels[i]) +
                                  " out of range");
        }
        const auto x = feats.row(i);
        double max_z = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n_id; ++j) {
            double z = 0.0;
            for (std::size_t d = 0; d < head.dim; ++d) z += head.V[j * head.dim + d] * x[d];
            logits[j] = z;
            max_z = std::max(max_z, z);
        }
        double denom = 0.0;
        for (double z : logits) denom += std::exp(z - max_z);
        const double log_denom = std::log(denom) + max_z;
        const double off = epsilon / static_cast<double>(n_id);
        for (std::size_t j = 0; j < n_id; ++j) {
            const double target = (j == labels[i] ? 1.0 - epsilon : 0.0) + off;
            total -= target * (logits[j] - log_denom);
        }
    }
    return total / static_cast<double>(labels.size());
}

ReidFeatures reid_features(std::span<const Descriptor> descs) {
    if (descs.empty()) {
        throw ValidationError("reid_features: empty batch");
    }
    ReidFeatures f;
    f.part = SampleMatrix(descs.front().parts * descs.front().c);
    f.fg = SampleMatrix(descs.front().c);
    f.global = SampleMatrix(descs.front().c);
    for (const auto& d : descs) {
        if (d.part_feats.size() != f.part.dim || d.fg_feat.size() != f.fg.dim) {
            throw ValidationError("reid_features: mixed descriptor configurations");
        }
        f.part.push(d.part_concat());
        f.fg.push(d.fg_feat);
        f.global.push(d.global_feat);
        f.ids.push_back(d.person_id);
    }
    return f;
}

namespace {

double group_loss(const SampleMatrix& feats, std::span<const std::uint32_t> ids,
                  const IdHead& head, double margin, double epsilon) {
    std::vector<std::size_t> labels;
    labels.reserve(ids.size());
    for (auto id : ids) labels.push_back(head.class_of(id));
    return triplet_loss(feats, ids, margin) + smoothed_ce(head, feats, labels, epsilon);
}

}  // namespace

LossReport combine_losses(double l_p, double l_f, double l_g, double alpha, double l_parsing) {
    LossReport r;
    r.l_p = l_p;
    r.l_f = l_f;
    r.l_g = l_g;
    r.l_parsing = l_parsing;
    r.alpha = alpha;
    r.total = l_p + l_f + l_g + alpha * l_parsing;
    return r;
}

LossReport reid_objective(std::span<const Descriptor> descs, const ReidHeads& heads,
                          double margin, double epsilon, double alpha, double l_parsing) {
    const auto f = reid_features(descs);
    return combine_losses(group_loss(f.part, f.ids, heads.part, margin, epsilon),
                          group_loss(f.fg, f.ids, heads.fg, margin, epsilon),
                          group_loss(f.global, f.ids, heads.global, margin, epsilon), alpha,
                          l_parsing);
}

}  // namespace isp
