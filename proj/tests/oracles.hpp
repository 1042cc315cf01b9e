#pragma once

// Reference implementations written from the definitions, deliberately naive
// and sharing no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "isp/matching.hpp"
#include "isp/parsing_head.hpp"
#include "isp/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double sqdist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return s;
}

struct LloydOut {
    std::vector<Vec> centroids;
    std::vector<std::size_t> assign;
    std::vector<double> inertia;
};

inline double nearest(const std::vector<Vec>& pts, const std::vector<Vec>& cs,
                      std::vector<std::size_t>& assign) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t best = 0;
        double bd = sqdist(pts[i], cs[0]);
        for (std::size_t j = 1; j < cs.size(); ++j) {
            const double d = sqdist(pts[i], cs[j]);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        assign[i] = best;
        total += bd;
    }
    return total;
}

// Textbook Lloyd with the farthest-point repair for emptied clusters.
inline LloydOut lloyd(const std::vector<Vec>& pts, std::vector<Vec> cs, std::size_t max_iter,
                      double tol) {
    LloydOut out;
    out.assign.resize(pts.size());
    out.inertia.push_back(nearest(pts, cs, out.assign));
    const std::size_t k = cs.size();
    const std::size_t dim = pts[0].size();
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::vector<Vec> sum(k, Vec(dim, 0.0));
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t d = 0; d < dim; ++d) sum[out.assign[i]][d] += pts[i][d];
            cnt[out.assign[i]]++;
        }
        std::vector<Vec> next = cs;
        for (std::size_t j = 0; j < k; ++j) {
            if (cnt[j] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) next[j][d] = sum[j][d] / static_cast<double>(cnt[j]);
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (cnt[j] != 0) continue;
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double d = sqdist(pts[i], next[out.assign[i]]);
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            next[j] = pts[far];
            cnt[out.assign[far]]--;
            out.assign[far] = j;
            cnt[j] = 1;
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) shift = std::max(shift, std::sqrt(sqdist(cs[j], next[j])));
        cs = next;
        out.inertia.push_back(nearest(pts, cs, out.assign));
        if (shift < tol) break;
    }
    out.centroids = cs;
    return out;
}

inline std::size_t distinct(const std::vector<Vec>& pts) {
    return std::set<Vec>(pts.begin(), pts.end()).size();
}

// Batch-hard triplet loss as the maximum hinge over every (positive, negative)
// pair of each anchor.
inline double triplet(const std::vector<Vec>& f, const std::vector<std::uint32_t>& ids,
                      double margin, bool& valid) {
    double sum = 0.0;
    std::size_t anchors = 0;
    for (std::size_t a = 0; a < f.size(); ++a) {
        double worst = -1.0;
        for (std::size_t p = 0; p < f.size(); ++p) {
            if (p == a || ids[p] != ids[a]) continue;
            for (std::size_t n = 0; n < f.size(); ++n) {
                if (ids[n] == ids[a]) continue;
                const double h = std::sqrt(sqdist(f[a], f[p])) - std::sqrt(sqdist(f[a], f[n])) + margin;
                worst = std::max(worst, std::max(0.0, h));
            }
        }
        if (worst >= 0.0) {
            sum += worst;
            ++anchors;
        }
    }
    valid = anchors > 0;
    return anchors ? sum / static_cast<double>(anchors) : 0.0;
}

inline double smoothed_ce(const std::vector<Vec>& V, const std::vector<Vec>& f,
                          const std::vector<std::size_t>& labels, double eps) {
    const double n = static_cast<double>(V.size());
    double total = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        Vec z(V.size());
        for (std::size_t k = 0; k < V.size(); ++k) {
            for (std::size_t d = 0; d < f[i].size(); ++d) z[k] += V[k][d] * f[i][d];
        }
        double denom = 0.0;
        for (double v : z) denom += std::exp(v);
        for (std::size_t k = 0; k < V.size(); ++k) {
            const double q = (k == labels[i] ? 1.0 - eps : 0.0) + eps / n;
            total -= q * std::log(std::exp(z[k]) / denom);
        }
    }
    return total / static_cast<double>(f.size());
}

struct Query {
    std::uint32_t pid, cam;
};

// Average precision and first-hit rank of one query by definition, after the
// same-person same-camera filter; rank 0 means no valid match.
inline void ranking(const std::vector<double>& dist, const Query& q, const std::vector<Query>& gal,
                    double& ap, std::size_t& first) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < gal.size(); ++j) {
        if (!(gal[j].pid == q.pid && gal[j].cam == q.cam)) idx.push_back(j);
    }
    // Insertion sort by (distance, index).
    for (std::size_t i = 1; i < idx.size(); ++i) {
        for (std::size_t j = i; j > 0; --j) {
            const auto a = idx[j - 1], b = idx[j];
            if (dist[b] < dist[a] || (dist[b] == dist[a] && b < a)) std::swap(idx[j - 1], idx[j]);
        }
    }
    std::vector<std::size_t> hits;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (gal[idx[r]].pid == q.pid) hits.push_back(r + 1);
    }
    first = hits.empty() ? 0 : hits[0];
    ap = 0.0;
    for (std::size_t h = 0; h < hits.size(); ++h) {
        ap += static_cast<double>(h + 1) / static_cast<double>(hits[h]);
    }
    if (!hits.empty()) ap /= static_cast<double>(hits.size());
}

inline double cosine(const Vec& u, const Vec& v) {
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0 || vv == 0) return 1.0;
    return 1.0 - uv / (std::sqrt(uu) * std::sqrt(vv));
}

inline Vec span_vec(std::span<const double> s) { return Vec(s.begin(), s.end()); }

inline double aligned(const isp::Descriptor& q, const isp::Descriptor& g) {
    double num = cosine(q.global_feat, g.global_feat) + cosine(q.fg_feat, g.fg_feat);
    double den = 2.0;
    for (std::size_t k = 1; k <= q.parts; ++k) {
        if (q.visibility[k - 1] && g.visibility[k - 1]) {
            num += cosine(span_vec(q.part(k)), span_vec(g.part(k)));
            den += 1.0;
        }
    }
    return num / den;
}

// Mean- or sum-reduced pixel cross-entropy of a linear softmax, straight from
// the logits.
inline double parsing_loss(const isp::PartClassifier& clf, const std::vector<isp::FeatureMap>& maps,
                           const std::vector<isp::LabelMap>& labels, bool mean) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        for (std::size_t p = 0; p < maps[i].pixels(); ++p) {
            const auto l = labels[i].labels[p];
            if (l == isp::kUnlabeled) continue;
            Vec z(clf.K);
            for (std::size_t k = 0; k < clf.K; ++k) {
                for (std::size_t d = 0; d < clf.c; ++d) z[k] += clf.W[k * clf.c + d] * maps[i].pixel(p)[d];
                if (clf.has_bias()) z[k] += clf.bias[k];
            }
            const double mx = *std::max_element(z.begin(), z.end());
            double s = 0.0;
            for (double v : z) s += std::exp(v - mx);
            total += mx + std::log(s) - z[l];
            ++count;
        }
    }
    return mean ? total / static_cast<double>(count) : total;
}

}  // namespace oracle

namespace testutil {

inline isp::FeatureMap random_map(std::mt19937_64& g, std::uint32_t id, std::uint32_t pid,
                                  std::size_t c, std::size_t h, std::size_t w, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    isp::FeatureMap m;
    m.image_id = id;
    m.person_id = pid;
    m.camera_id = id % 2;
    m.c = c;
    m.h = h;
    m.w = w;
    m.data.resize(c * h * w);
    for (auto& v : m.data) v = static_cast<float>(n(g));
    return m;
}

inline isp::FeatureMap make_map(std::size_t c, std::size_t h, std::size_t w,
                                std::vector<float> data, std::uint32_t id = 0,
                                std::uint32_t pid = 0) {
    isp::FeatureMap m;
    m.image_id = id;
    m.person_id = pid;
    m.c = c;
    m.h = h;
    m.w = w;
    m.data = std::move(data);
    return m;
}

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("isp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testutil
