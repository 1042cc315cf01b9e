#include "isp/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "isp/common.hpp"

namespace isp {

RetrievalMetrics cmc_map(const DistanceMatrix& dm) {
    if (dm.query.size() != dm.q || dm.gallery.size() != dm.g || dm.values.size() != dm.q * dm.g) {
        throw ValidationError("cmc_map: distance matrix metadata is incomplete");
    }
    RetrievalMetrics out;
    out.cmc.assign(dm.g, 0.0);
    double ap_sum = 0.0;
    std::vector<std::size_t> order(dm.g);
    for (std::size_t i = 0; i < dm.q; ++i) {
        const auto& qm = dm.query[i];
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dm.at(i, a) < dm.at(i, b); });

        std::size_t rank = 0;
        std::size_t hits = 0;
        std::size_t first_hit = 0;
        double precision_sum = 0.0;
        for (std::size_t j : order) {
            const auto& gm = dm.gallery[j];
            if (gm.person_id == qm.person_id && gm.camera_id == qm.camera_id) {
                continue;
            }
            ++rank;
            if (gm.person_id == qm.person_id) {
                ++hits;
                if (hits == 1) first_hit = rank;
                precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
            }
        }
        if (hits == 0) {
            ++out.skipped;
            continue;
        }
        ++out.evaluated;
        ap_sum += precision_sum / static_cast<double>(hits);
        for (std::size_t r = first_hit; r <= dm.g; ++r) {
            out.cmc[r - 1] += 1.0;
        }
    }
    if (out.evaluated == 0) {
        throw ValidationError("cmc_map: no query has a valid gallery match");
    }
    const double n = static_cast<double>(out.evaluated);
    for (auto& v : out.cmc) v /= n;
    out.map = ap_sum / n;
    return out;
}

IouMetrics parsing_iou(std::span<const LabelMap> pred, std::span<const LabelMap> truth,
                       std::size_t K, const std::vector<std::uint8_t>* group) {
    if (pred.size() != truth.size()) {
        throw ValidationError("parsing_iou: prediction and truth cover different image counts");
    }
    std::unordered_map<std::uint32_t, const LabelMap*> by_id;
    for (const auto& t : truth) {
        by_id[t.image_id] = &t;
    }
    auto remap = [&](std::uint8_t l) -> int {
        if (l == kUnlabeled) return -1;
        if (group == nullptr) return l;
        if (l >= group->size()) {
            throw ValidationError("parsing_iou: label " + std::to_string(l) + " has no group");
        }
        return (*group)[l];
    };
    std::size_t labels = K;
    if (group != nullptr && !group->empty()) {
        labels = static_cast<std::size_t>(*std::max_element(group->begin(), group->end())) + 1;
    }

    std::vector<std::size_t> inter(labels, 0);
    std::vector<std::size_t> uni(labels, 0);
    std::size_t fg_inter = 0;
    std::size_t fg_union = 0;
    for (const auto& p : pred) {
        const auto it = by_id.find(p.image_id);
        if (it == by_id.end()) {
            throw ValidationError("parsing_iou: no truth for image " + std::to_string(p.image_id));
        }
        const auto& t = *it->second;
        if (t.h != p.h || t.w != p.w || t.labels.size() != p.labels.size()) {
            throw ValidationError("parsing_iou: shape mismatch on image " +
                                  std::to_string(p.image_id));
        }
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
            if (t.labels[i] == kUnlabeled) continue;
            const int a = remap(p.labels[i]);
            const int b = remap(t.labels[i]);
            if (a >= static_cast<int>(labels) || b >= static_cast<int>(labels)) {
                throw ValidationError("parsing_iou: label exceeds K");
            }
            if (a >= 0) ++uni[static_cast<std::size_t>(a)];
            if (b >= 0 && b != a) ++uni[static_cast<std::size_t>(b)];
            if (a >= 0 && a == b) ++inter[static_cast<std::size_t>(a)];
            const bool fa = a > 0;
            const bool fb = b > 0;
            fg_union += (fa || fb) ? 1 : 0;
            fg_inter += (fa && fb) ? 1 : 0;
        }
    }

    IouMetrics out;
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t k = 0; k < labels; ++k) {
        if (uni[k] == 0) continue;
        const double iou = static_cast<double>(inter[k]) / static_cast<double>(uni[k]);
        out.per_part[static_cast<int>(k)] = iou;
        if (k > 0) {
            sum += iou;
            ++counted;
        }
    }
    out.mean_iou = counted ? sum / static_cast<double>(counted) : 0.0;
    out.fg_iou = fg_union ? static_cast<double>(fg_inter) / static_cast<double>(fg_union) : 0.0;
    return out;
}

std::string MetricReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    if (retrieval) {
        const auto& r = *retrieval;
        os << "Retrieval (" << r.evaluated << " queries";
        if (r.skipped) os << ", " << r.skipped << " skipped";
        os << ")\n";
        for (std::size_t rank : {1u, 5u, 10u}) {
            if (rank <= r.cmc.size()) {
                os << "  Rank-" << rank << ": " << r.cmc[rank - 1] << "\n";
            }
        }
        os << "  mAP:    " << r.map << "\n";
    }
    if (iou) {
        os << "Parsing IoU\n";
        os << "  foreground: " << iou->fg_iou << "\n";
        for (const auto& [k, v] : iou->per_part) {
            os << "  part " << k << ": " << v << "\n";
        }
        os << "  mean (parts): " << iou->mean_iou << "\n";
    }
    return os.str();
}

std::string MetricReport::to_key_values() const {
    std::ostringstream os;
    os.precision(10);
    if (retrieval) {
        const auto& r = *retrieval;
        os << "queries=" << r.evaluated << "\n";
        os << "skipped_queries=" << r.skipped << "\n";
        for (std::size_t i = 0; i < r.cmc.size(); ++i) {
            os << "cmc." << i + 1 << "=" << r.cmc[i] << "\n";
        }
        os << "map=" << r.map << "\n";
    }
    if (iou) {
        os << "fg_iou=" << iou->fg_iou << "\n";
        for (const auto& [k, v] : iou->per_part) {
            os << "iou." << k << "=" << v << "\n";
        }
        os << "mean_iou=" << iou->mean_iou << "\n";
    }
    return os.str();
}

}  // namespace isp
