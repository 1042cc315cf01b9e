#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "isp/schedule.hpp"
#include "isp/tensor.hpp"

namespace isp {

/// Linear softmax part classifier over pixel features: logits = W x (+ b).
/// W is K×c row-major. The bias is optional; without it the head is exactly
/// softmax(W_k^T x).
struct PartClassifier {
    std::size_t K = 0;
    std::size_t c = 0;
    std::vector<double> W;
    std::vector<double> bias;  // empty, or K entries

    static PartClassifier zeros(std::size_t K, std::size_t c, bool with_bias = false);

    bool has_bias() const { return !bias.empty(); }
    std::span<const double> row(std::size_t k) const { return {W.data() + k * c, c}; }
    void validate() const;
};

/// Per-pixel part probabilities, k-major: probs[k * h * w + pixel].
struct ConfidenceMaps {
    std::uint32_t image_id = 0;
    std::size_t K = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> probs;

    std::size_t pixels() const { return h * w; }
    double at(std::size_t k, std::size_t pixel) const { return probs[k * h * w + pixel]; }
    // Most confident part per pixel; ties go to the lower index.
    std::size_t argmax(std::size_t pixel) const;
};

/// Pooled representation of one image: F_1..F_{K-1}, F_f, F_g and the
/// visibility of each part.
struct Descriptor {
    std::uint32_t image_id = 0;
    std::uint32_t person_id = 0;
    std::uint32_t camera_id = 0;
    std::size_t parts = 0;  // K - 1
    std::size_t c = 0;
    std::vector<double> part_feats;  // parts×c; row k-1 holds F_k
    std::vector<double> fg_feat;
    std::vector<double> global_feat;
    std::vector<std::uint8_t> visibility;  // parts entries

    std::span<const double> part(std::size_t k) const {
        return {part_feats.data() + (k - 1) * c, c};
    }
    std::span<double> part(std::size_t k) { return {part_feats.data() + (k - 1) * c, c}; }
    // F_1..F_{K-1} concatenated.
    std::span<const double> part_concat() const { return part_feats; }
};

enum class Reduction { Sum, Mean };

ConfidenceMaps forward_confidences(const PartClassifier& clf, const FeatureMap& m);

/// Cross-entropy of the confidences against the labels; unlabeled (255)
/// pixels are skipped. Throws DegenerateInputError if nothing is labeled.
double parsing_loss(const ConfidenceMaps& conf, const LabelMap& labels,
                    Reduction reduction = Reduction::Sum);

LabelMap predict_labels(const ConfidenceMaps& conf, std::uint32_t person_id);

struct ParsingGradient {
    double loss = 0.0;       // under the requested reduction
    std::size_t pixels = 0;  // labeled pixels that contributed
    std::vector<double> dW;  // K×c
    std::vector<double> dbias;
};

/// Analytic gradient of the parsing loss over a batch of images:
/// dL/dW_k = sum over labeled pixels of (P_k - [k = label]) x, divided by the
/// pixel count under Reduction::Mean. Per-image partials are reduced in image
/// order.
ParsingGradient parsing_loss_gradient(const PartClassifier& clf,
                                      std::span<const FeatureMap* const> maps,
                                      std::span<const LabelMap* const> labels,
                                      Reduction reduction);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainOptions {
    std::size_t batch_size = 64;  // images per step
    Reduction reduction = Reduction::Mean;
    AdamConfig adam;
};

/// Adam on W (and the bias) with persistent moment state, so training can be
/// resumed across pseudo-label rounds.
class ClassifierTrainer {
public:
    ClassifierTrainer(PartClassifier init, TrainOptions opts);

    /// One pass over the images in a seed-shuffled order. Returns the
    /// pixel-weighted mean loss seen before each step. `epoch` is only used
    /// for the shuffle seed and divergence reporting.
    double train_epoch(const FeatureMapSet& set, std::span<const LabelMap> labels, double lr,
                       std::uint64_t seed, std::size_t epoch);

    const PartClassifier& classifier() const { return clf_; }
    std::size_t steps() const { return step_; }

private:
    void apply(const ParsingGradient& g, double lr);

    PartClassifier clf_;
    TrainOptions opts_;
    std::vector<double> m_w_, v_w_, m_b_, v_b_;
    std::size_t step_ = 0;
};

struct TrainResult {
    PartClassifier classifier;
    std::vector<double> loss_history;  // one entry per epoch
};

/// Trains for `epochs` epochs with lr_at(schedule, e). Throws ValidationError
/// for zero epochs and DivergenceError on a non-finite loss.
TrainResult train_classifier(const PartClassifier& clf, const FeatureMapSet& set,
                             std::span<const LabelMap> labels, const LrSchedule& schedule,
                             std::size_t epochs, std::uint64_t seed,
                             const TrainOptions& opts = {});

/// Weighted pooling: M_k = P_k ∘ M_g, F_k = GAP(M_k), F_f = GAP(sum_{k>=1} M_k),
/// F_g = GAP(M_g); visibility from the same confidences.
Descriptor pool_descriptor(const ConfidenceMaps& conf, const FeatureMap& m);
Descriptor pool_descriptor(const PartClassifier& clf, const FeatureMap& m);

// ISPW checkpoint. Version 1 carries W only; version 2 appends K biases.
void save_classifier(const PartClassifier& clf, const std::filesystem::path& path);
PartClassifier load_classifier(const std::filesystem::path& path);

}  // namespace isp
