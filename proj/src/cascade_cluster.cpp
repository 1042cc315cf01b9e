#include "isp/cascade_cluster.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "isp/common.hpp"

namespace isp {

namespace {
constexpr std::size_t kRestarts = 4;
}

std::string to_string(ClusterWarningKind kind) {
    switch (kind) {
        case ClusterWarningKind::UniformActivation:
            return "uniform-activation";
        case ClusterWarningKind::ReducedParts:
            return "reduced-parts";
        case ClusterWarningKind::EmptyForeground:
            return "empty-foreground";
    }
    return "unknown";
}

ForegroundSplit stage1_foreground_split(const FeatureMapSet& set, std::uint32_t person_id,
                                        std::uint64_t seed) {
    ForegroundSplit out;
    out.images = set.images_of(person_id);
    if (out.images.empty()) {
        throw ValidationError("person_id " + std::to_string(person_id) + " not in set");
    }
    const std::size_t hw = set.h() * set.w();

    SampleMatrix samples(1);
    samples.values.reserve(out.images.size() * hw);
    for (std::size_t idx : out.images) {
        const auto& m = set.maps[idx];
        try {
            const auto a = activation_map(m);
            samples.values.insert(samples.values.end(), a.values.begin(), a.values.end());
        } catch (const DegenerateInputError&) {
            // An all-zero image has no response anywhere.
            samples.values.insert(samples.values.end(), hw, 0.0);
        }
    }

    const auto km = kmeans(samples, {.k = 2, .seed = seed, .n_init = kRestarts});
    out.model = km.model;
    out.uniform = km.model.k < 2;
    std::size_t fg_cluster = 0;
    if (!out.uniform) {
        fg_cluster = km.model.centroid(1)[0] > km.model.centroid(0)[0] ? 1 : 0;
    }

    out.masks.reserve(out.images.size());
    for (std::size_t s = 0; s < out.images.size(); ++s) {
        std::vector<std::uint8_t> mask(hw);
        for (std::size_t p = 0; p < hw; ++p) {
            mask[p] = out.uniform || km.assignments[s * hw + p] == fg_cluster ? 1 : 0;
        }
        out.masks.push_back(std::move(mask));
    }
    return out;
}

Stage2Samples stage2_samples(const FeatureMapSet& set, const ForegroundSplit& fg) {
    Stage2Samples out;
    out.samples = SampleMatrix(set.c());
    for (std::size_t s = 0; s < fg.images.size(); ++s) {
        const auto dirs = direction_map(set.maps[fg.images[s]]);
        const auto& mask = fg.masks[s];
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (mask[p] == 0 || dirs.degenerate[p] != 0) {
                continue;
            }
            out.samples.push(dirs.at(p));
            out.image_slot.push_back(s);
            out.pixel.push_back(p);
        }
    }
    return out;
}

PartSplit stage2_part_split(const FeatureMapSet& set, std::uint32_t person_id,
                            const ForegroundSplit& fg, std::size_t K, std::uint64_t seed,
                            const std::optional<std::vector<double>>& warm_start) {
    if (K < 2) {
        throw ValidationError("stage2_part_split: K must be >= 2");
    }
    const auto s2 = stage2_samples(set, fg);
    if (s2.samples.size() == 0) {
        throw DegenerateInputError("person " + std::to_string(person_id) +
                                   ": no foreground pixel to cluster into parts");
    }
    const std::size_t dim = set.c();
    const std::size_t parts = K - 1;

    KMeansResult km;
    const std::size_t k_eff = std::min(parts, count_distinct(s2.samples));
    if (warm_start && warm_start->size() == k_eff * dim) {
        km = lloyd(s2.samples, *warm_start, KMeansOptions{}.max_iter, KMeansOptions{}.tol);
        km.requested_k = parts;
        km.reduced_k = k_eff < parts;
    } else {
        km = kmeans(s2.samples, {.k = parts, .seed = seed, .n_init = kRestarts});
    }

    const std::size_t k = km.model.k;
    const std::size_t w = set.w();
    std::vector<double> row_sum(k, 0.0);
    std::vector<double> col_sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < s2.pixel.size(); ++i) {
        const std::size_t j = km.assignments[i];
        row_sum[j] += static_cast<double>(s2.pixel[i] / w);
        col_sum[j] += static_cast<double>(s2.pixel[i] % w);
        ++count[j];
    }

    PartSplit out;
    out.images = fg.images;
    out.model = km.model;
    out.reduced = km.reduced_k;
    out.ordering.person_id = person_id;
    out.ordering.mean_row.resize(k);
    out.ordering.mean_col.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double inf = std::numeric_limits<double>::infinity();
        out.ordering.mean_row[j] = count[j] ? row_sum[j] / static_cast<double>(count[j]) : inf;
        out.ordering.mean_col[j] = count[j] ? col_sum[j] / static_cast<double>(count[j]) : inf;
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& r = out.ordering.mean_row;
        const auto& c = out.ordering.mean_col;
        if (r[a] != r[b]) return r[a] < r[b];
        if (c[a] != c[b]) return c[a] < c[b];
        return a < b;
    });
    out.ordering.label_of_cluster.resize(k);
    for (std::size_t rank = 0; rank < k; ++rank) {
        out.ordering.label_of_cluster[order[rank]] = static_cast<std::uint8_t>(rank + 1);
    }

    const std::size_t hw = set.h() * w;
    out.raw.assign(fg.images.size(), std::vector<int>(hw, -1));
    for (std::size_t i = 0; i < s2.pixel.size(); ++i) {
        out.raw[s2.image_slot[i]][s2.pixel[i]] = static_cast<int>(km.assignments[i]);
    }
    return out;
}

namespace {

struct PersonJob {
    std::vector<std::size_t> images;
    std::vector<std::vector<std::uint8_t>> labels;
    std::vector<std::vector<std::uint8_t>> foreground;
    std::vector<ClusterWarning> warnings;
    std::optional<std::vector<double>> centroids;
    std::optional<PartOrdering> ordering;
};

PersonJob cluster_person(const FeatureMapSet& set, std::uint32_t person_id,
                         const PseudoLabelOptions& opts) {
    PersonJob job;
    const auto fg = stage1_foreground_split(set, person_id, mix_seed(opts.seed, 2ULL * person_id));
    job.images = fg.images;
    job.foreground = fg.masks;
    if (fg.uniform) {
        job.warnings.push_back({person_id, ClusterWarningKind::UniformActivation,
                                "all activations identical; every pixel is foreground"});
    }

    // Background is 0; foreground pixels without a stage-2 sample stay unlabeled.
    job.labels.reserve(fg.masks.size());
    for (const auto& mask : fg.masks) {
        std::vector<std::uint8_t> l(mask.size());
        for (std::size_t p = 0; p < mask.size(); ++p) {
            l[p] = mask[p] ? kUnlabeled : 0;
        }
        job.labels.push_back(std::move(l));
    }

    std::optional<std::vector<double>> warm;
    if (opts.warm_start != nullptr) {
        if (auto it = opts.warm_start->find(person_id); it != opts.warm_start->end()) {
            warm = it->second;
        }
    }
    try {
        const auto parts = stage2_part_split(set, person_id, fg, opts.K,
                                             mix_seed(opts.seed, 2ULL * person_id + 1), warm);
        if (parts.reduced) {
            job.warnings.push_back({person_id, ClusterWarningKind::ReducedParts,
                                    "only " + std::to_string(parts.model.k) +
                                        " distinct foreground directions"});
        }
        for (std::size_t s = 0; s < parts.raw.size(); ++s) {
            for (std::size_t p = 0; p < parts.raw[s].size(); ++p) {
                if (const int r = parts.raw[s][p]; r >= 0) {
                    job.labels[s][p] = parts.ordering.label_of_cluster[static_cast<std::size_t>(r)];
                }
            }
        }
        job.centroids = parts.model.centroids;
        job.ordering = parts.ordering;
    } catch (const DegenerateInputError& e) {
        job.warnings.push_back({person_id, ClusterWarningKind::EmptyForeground, e.what()});
    }
    return job;
}

}  // namespace

PseudoLabelResult generate_pseudo_labels(const FeatureMapSet& set,
                                         const PseudoLabelOptions& opts) {
    set.validate();
    if (opts.K < 2 || opts.K >= kUnlabeled) {
        throw ValidationError("generate_pseudo_labels: K must be in [2, 254]");
    }
    const auto ids = set.person_ids();
    std::vector<PersonJob> jobs(ids.size());
    parallel_for(ids.size(), [&](std::size_t i) { jobs[i] = cluster_person(set, ids[i], opts); });

    PseudoLabelResult result;
    result.labels.resize(set.n());
    result.foreground.resize(set.n());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& job = jobs[i];
        for (std::size_t s = 0; s < job.images.size(); ++s) {
            const auto& m = set.maps[job.images[s]];
            result.labels[job.images[s]] =
                PseudoLabelMap{m.image_id, m.person_id, m.h, m.w, std::move(job.labels[s])};
            result.foreground[job.images[s]] = std::move(job.foreground[s]);
        }
        result.warnings.insert(result.warnings.end(), job.warnings.begin(), job.warnings.end());
        if (job.centroids) {
            result.part_centroids[ids[i]] = std::move(*job.centroids);
        }
        if (job.ordering) {
            result.orderings[ids[i]] = std::move(*job.ordering);
        }
    }
    return result;
}

}  // namespace isp
