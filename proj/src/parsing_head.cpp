#include "isp/parsing_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "isp/binary_io.hpp"
#include "isp/common.hpp"
#include "isp/matching.hpp"

namespace isp {

PartClassifier PartClassifier::zeros(std::size_t K, std::size_t c, bool with_bias) {
    PartClassifier clf;
    clf.K = K;
    clf.c = c;
    clf.W.assign(K * c, 0.0);
    if (with_bias) {
        clf.bias.assign(K, 0.0);
    }
    return clf;
}

void PartClassifier::validate() const {
    if (K < 2 || c < 1 || W.size() != K * c || !(bias.empty() || bias.size() == K)) {
        throw ValidationError("part classifier: inconsistent shape");
    }
    for (double v : W) {
        if (!std::isfinite(v)) throw ValidationError("part classifier: non-finite weight");
    }
    for (double v : bias) {
        if (!std::isfinite(v)) throw ValidationError("part classifier: non-finite bias");
    }
}

std::size_t ConfidenceMaps::argmax(std::size_t pixel) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
        if (at(k, pixel) > at(best, pixel)) {
            best = k;
        }
    }
    return best;
}

namespace {

// Softmax of one pixel into probs (length K); returns nothing, writes in place.
void pixel_softmax(const PartClassifier& clf, std::span<const float> x, std::span<double> probs) {
    double max_logit = -INFINITY;
    for (std::size_t k = 0; k < clf.K; ++k) {
        double z = clf.has_bias() ? clf.bias[k] : 0.0;
        const auto wk = clf.row(k);
        for (std::size_t ch = 0; ch < clf.c; ++ch) {
            z += wk[ch] * static_cast<double>(x[ch]);
        }
        probs[k] = z;
        max_logit = std::max(max_logit, z);
    }
    double denom = 0.0;
    for (auto& p : probs) {
        p = std::exp(p - max_logit);
        denom += p;
    }
    for (auto& p : probs) {
        p /= denom;
    }
}

void check_dims(const PartClassifier& clf, const FeatureMap& m) {
    if (clf.c != m.c) {
        throw ValidationError("classifier expects c=" + std::to_string(clf.c) + ", map " +
                              std::to_string(m.image_id) + " has c=" + std::to_string(m.c));
    }
}

}  // namespace

ConfidenceMaps forward_confidences(const PartClassifier& clf, const FeatureMap& m) {
    check_dims(clf, m);
    const std::size_t hw = m.pixels();
    ConfidenceMaps conf{m.image_id, clf.K, m.h, m.w, std::vector<double>(clf.K * hw)};
    std::vector<double> probs(clf.K);
    for (std::size_t p = 0; p < hw; ++p) {
        pixel_softmax(clf, m.pixel(p), probs);
        for (std::size_t k = 0; k < clf.K; ++k) {
            conf.probs[k * hw + p] = probs[k];
        }
    }
    return conf;
}

double parsing_loss(const ConfidenceMaps& conf, const LabelMap& labels, Reduction reduction) {
    if (labels.h != conf.h || labels.w != conf.w || labels.labels.size() != conf.pixels()) {
        throw ValidationError("parsing_loss: label map shape differs from confidences");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < conf.pixels(); ++p) {
        const auto l = labels.labels[p];
        if (l == kUnlabeled) {
            continue;
        }
        if (l >= conf.K) {
            throw ValidationError("parsing_loss: label exceeds K");
        }
        sum -= std::log(conf.at(l, p));
        ++count;
    }
    if (count == 0) {
        throw DegenerateInputError("parsing_loss: no labeled pixel");
    }
    return reduction == Reduction::Sum ? sum : sum / static_cast<double>(count);
}

LabelMap predict_labels(const ConfidenceMaps& conf, std::uint32_t person_id) {
    LabelMap out{conf.image_id, person_id, conf.h, conf.w,
                 std::vector<std::uint8_t>(conf.pixels())};
    for (std::size_t p = 0; p < conf.pixels(); ++p) {
        out.labels[p] = static_cast<std::uint8_t>(conf.argmax(p));
    }
    return out;
}

ParsingGradient parsing_loss_gradient(const PartClassifier& clf,
                                      std::span<const FeatureMap* const> maps,
                                      std::span<const LabelMap* const> labels,
                                      Reduction reduction) {
    if (maps.size() != labels.size()) {
        throw ValidationError("parsing_loss_gradient: map/label count mismatch");
    }
    const std::size_t K = clf.K;
    const std::size_t c = clf.c;

    std::vector<ParsingGradient> partial(maps.size());
    parallel_for(maps.size(), [&](std::size_t i) {
        const auto& m = *maps[i];
        const auto& lab = *labels[i];
        check_dims(clf, m);
        if (lab.labels.size() != m.pixels()) {
            throw ValidationError("parsing_loss_gradient: label map shape differs from map " +
                                  std::to_string(m.image_id));
        }
        auto& g = partial[i];
        g.dW.assign(K * c, 0.0);
        g.dbias.assign(K, 0.0);
        std::vector<double> probs(K);
        for (std::size_t p = 0; p < m.pixels(); ++p) {
            const auto l = lab.labels[p];
            if (l == kUnlabeled) {
                continue;
            }
            if (l >= K) {
                throw ValidationError("parsing_loss_gradient: label exceeds K");
            }
            const auto x = m.pixel(p);
            pixel_softmax(clf, x, probs);
            g.loss -= std::log(probs[l]);
            ++g.pixels;
            for (std::size_t k = 0; k < K; ++k) {
                const double r = probs[k] - (k == l ? 1.0 : 0.0);
                g.dbias[k] += r;
                double* row = g.dW.data() + k * c;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    row[ch] += r * static_cast<double>(x[ch]);
                }
            }
        }
    });

    ParsingGradient total;
    total.dW.assign(K * c, 0.0);
    total.dbias.assign(K, 0.0);
    for (const auto& g : partial) {
        total.loss += g.loss;
        total.pixels += g.pixels;
        for (std::size_t j = 0; j < total.dW.size(); ++j) total.dW[j] += g.dW[j];
        for (std::size_t k = 0; k < K; ++k) total.dbias[k] += g.dbias[k];
    }
    if (total.pixels == 0) {
        throw DegenerateInputError("parsing_loss_gradient: no labeled pixel");
    }
    if (reduction == Reduction::Mean) {
        const double inv = 1.0 / static_cast<double>(total.pixels);
        total.loss *= inv;
        for (auto& v : total.dW) v *= inv;
        for (auto& v : total.dbias) v *= inv;
    }
    if (!clf.has_bias()) {
        total.dbias.clear();
    }
    return total;
}

ClassifierTrainer::ClassifierTrainer(PartClassifier init, TrainOptions opts)
    : clf_(std::move(init)), opts_(opts) {
    clf_.validate();
    if (opts_.batch_size == 0) {
        throw ValidationError("batch_size must be >= 1");
    }
    m_w_.assign(clf_.W.size(), 0.0);
    v_w_.assign(clf_.W.size(), 0.0);
    m_b_.assign(clf_.bias.size(), 0.0);
    v_b_.assign(clf_.bias.size(), 0.0);
}

void ClassifierTrainer::apply(const ParsingGradient& g, double lr) {
    ++step_;
    const auto& a = opts_.adam;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(a.beta1, t);
    const double c2 = 1.0 - std::pow(a.beta2, t);
    auto update = [&](std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& grad) {
        for (std::size_t j = 0; j < param.size(); ++j) {
            m[j] = a.beta1 * m[j] + (1.0 - a.beta1) * grad[j];
            v[j] = a.beta2 * v[j] + (1.0 - a.beta2) * grad[j] * grad[j];
            param[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + a.eps);
        }
    };
    update(clf_.W, m_w_, v_w_, g.dW);
    if (clf_.has_bias()) {
        update(clf_.bias, m_b_, v_b_, g.dbias);
    }
}

double ClassifierTrainer::train_epoch(const FeatureMapSet& set, std::span<const LabelMap> labels,
                                      double lr, std::uint64_t seed, std::size_t epoch) {
    if (labels.size() != set.n()) {
        throw ValidationError("train: need one label map per feature map");
    }
    std::vector<std::size_t> order(set.n());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.index(i)]);
    }

    double loss_sum = 0.0;
    std::size_t pixels = 0;
    for (std::size_t start = 0; start < order.size(); start += opts_.batch_size) {
        const std::size_t end = std::min(order.size(), start + opts_.batch_size);
        std::vector<const FeatureMap*> maps;
        std::vector<const LabelMap*> labs;
        for (std::size_t i = start; i < end; ++i) {
            maps.push_back(&set.maps[order[i]]);
            labs.push_back(&labels[order[i]]);
        }
        ParsingGradient g;
        try {
            g = parsing_loss_gradient(clf_, maps, labs, opts_.reduction);
        } catch (const DegenerateInputError&) {
            continue;  // batch without labeled pixels
        }
        if (!std::isfinite(g.loss)) {
            throw DivergenceError("parsing loss is not finite at epoch " + std::to_string(epoch),
                                  epoch);
        }
        const double batch_sum =
            opts_.reduction == Reduction::Mean ? g.loss * static_cast<double>(g.pixels) : g.loss;
        loss_sum += batch_sum;
        pixels += g.pixels;
        apply(g, lr);
    }
    if (pixels == 0) {
        throw DegenerateInputError("train: no labeled pixel in the whole set");
    }
    for (double v : clf_.W) {
        if (!std::isfinite(v)) {
            throw DivergenceError("classifier weights diverged at epoch " + std::to_string(epoch),
                                  epoch);
        }
    }
    return loss_sum / static_cast<double>(pixels);
}

TrainResult train_classifier(const PartClassifier& clf, const FeatureMapSet& set,
                             std::span<const LabelMap> labels, const LrSchedule& schedule,
                             std::size_t epochs, std::uint64_t seed, const TrainOptions& opts) {
    if (epochs == 0) {
        throw ValidationError("train_classifier: epochs must be >= 1");
    }
    if (epochs > schedule.total_epochs) {
        throw ValidationError("train_classifier: epochs exceed the schedule length");
    }
    ClassifierTrainer trainer(clf, opts);
    TrainResult result;
    for (std::size_t e = 0; e < epochs; ++e) {
        result.loss_history.push_back(trainer.train_epoch(set, labels, lr_at(schedule, e), seed, e));
    }
    result.classifier = trainer.classifier();
    return result;
}

Descriptor pool_descriptor(const ConfidenceMaps& conf, const FeatureMap& m) {
    if (conf.h != m.h || conf.w != m.w || conf.K < 2) {
        throw ValidationError("pool_descriptor: confidences do not match the feature map");
    }
    const std::size_t parts = conf.K - 1;
    const std::size_t c = m.c;
    const std::size_t hw = m.pixels();
    Descriptor d;
    d.image_id = m.image_id;
    d.person_id = m.person_id;
    d.camera_id = m.camera_id;
    d.parts = parts;
    d.c = c;
    d.part_feats.assign(parts * c, 0.0);
    d.fg_feat.assign(c, 0.0);
    d.global_feat.assign(c, 0.0);

    for (std::size_t p = 0; p < hw; ++p) {
        const auto x = m.pixel(p);
        double fg_weight = 0.0;
        for (std::size_t k = 1; k < conf.K; ++k) {
            const double pk = conf.at(k, p);
            fg_weight += pk;
            double* fk = d.part_feats.data() + (k - 1) * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
                fk[ch] += pk * static_cast<double>(x[ch]);
            }
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
            d.fg_feat[ch] += fg_weight * static_cast<double>(x[ch]);
            d.global_feat[ch] += static_cast<double>(x[ch]);
        }
    }
    const double inv = 1.0 / static_cast<double>(hw);
    for (auto& v : d.part_feats) v *= inv;
    for (auto& v : d.fg_feat) v *= inv;
    for (auto& v : d.global_feat) v *= inv;

    const auto vis = visibility_labels(conf);
    d.visibility.assign(vis.begin(), vis.end());
    return d;
}

Descriptor pool_descriptor(const PartClassifier& clf, const FeatureMap& m) {
    return pool_descriptor(forward_confidences(clf, m), m);
}

void save_classifier(const PartClassifier& clf, const std::filesystem::path& path) {
    clf.validate();
    binary::Writer out(path);
    out.magic("ISPW");
    out.u32(clf.has_bias() ? 2 : 1);
    out.u32(static_cast<std::uint32_t>(clf.K));
    out.u32(static_cast<std::uint32_t>(clf.c));
    for (double v : clf.W) {
        out.f32(static_cast<float>(v));
    }
    for (double v : clf.bias) {
        out.f32(static_cast<float>(v));
    }
    out.close();
}

PartClassifier load_classifier(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("ISPW");
    const auto version = in.u32();
    if (version != 1 && version != 2) {
        throw FormatError("unsupported ISPW version " + std::to_string(version));
    }
    const std::size_t K = in.u32();
    const std::size_t c = in.u32();
    const std::uint64_t expected = 4ULL * (K * c + (version == 2 ? K : 0));
    if (in.remaining() != expected) {
        throw ValidationError("ISPW: payload size does not match K and c");
    }
    auto clf = PartClassifier::zeros(K, c, version == 2);
    for (double& v : clf.W) {
        v = in.f32();
    }
    for (double& v : clf.bias) {
        v = in.f32();
    }
    clf.validate();
    return clf;
}

}  // namespace isp
