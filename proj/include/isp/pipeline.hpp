#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isp/cascade_cluster.hpp"
#include "isp/config.hpp"
#include "isp/eval.hpp"
#include "isp/parsing_head.hpp"
#include "isp/reid_losses.hpp"

namespace isp {

/// What was measured at the end of one reassignment interval.
struct IntervalRecord {
    std::size_t interval = 0;
    std::size_t end_epoch = 0;     // epochs trained so far
    std::size_t clustering_round = 0;  // round that produced the new labels
    double lr = 0.0;               // rate of the last epoch in the interval
    double train_loss = 0.0;       // mean loss over the last epoch
    double parsing_loss_sum = 0.0; // against the labels used for training
    double parsing_loss_mean = 0.0;
    std::optional<LossReport> reid;  // absent when the batch has no valid triplet
    double label_change = 0.0;     // fraction of pixels relabeled by the new round
    std::optional<IouMetrics> pseudo_iou;  // new labels vs truth
    std::optional<IouMetrics> pred_iou;    // classifier argmax vs truth
};

struct PipelineResult {
    PartClassifier classifier;
    PseudoLabelResult labels;  // final round
    std::vector<Descriptor> descriptors;
    std::vector<ConfidenceMaps> confidences;
    std::optional<DistanceMatrix> distances;
    std::vector<IntervalRecord> history;
    MetricReport final_report;  // retrieval + classifier IoU when truth is given
    std::size_t clustering_rounds = 0;
    std::vector<ClusterWarning> warnings;

    /// History as key=value lines (`interval.<i>.<field>=...`) followed by
    /// the final report.
    std::string metrics_text() const;
};

/// Called after each interval; used by the CLI for progress output.
using IntervalObserver = std::function<void(const IntervalRecord&)>;

/// Clusters the raw maps, then alternates `reassign_interval` training epochs
/// with a fresh clustering round until total_epochs are spent (or labels stop
/// changing with early_stop). Retrieval uses the first image of each identity
/// as query and the rest as gallery.
PipelineResult run_pipeline(const FeatureMapSet& set, const RunConfig& cfg,
                            const std::optional<LabelSet>& truth = std::nullopt,
                            const IntervalObserver& observer = {});

/// Writes labels.ispl, classifier.ispw, descriptors.ispr, distances.ispd,
/// metrics.txt and config.txt into `dir` (created if missing).
void write_pipeline_artifacts(const PipelineResult& result, const RunConfig& cfg,
                              const std::filesystem::path& dir);

}  // namespace isp
