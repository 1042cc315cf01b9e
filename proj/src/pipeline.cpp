#include "isp/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "isp/common.hpp"
#include "isp/matching.hpp"

namespace isp {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr double kIdHeadScale = 10.0;
constexpr double kEarlyStopChange = 1e-3;

double label_change(const std::vector<LabelMap>& before, const std::vector<LabelMap>& after) {
    std::size_t changed = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        for (std::size_t p = 0; p < before[i].labels.size(); ++p) {
            changed += before[i].labels[p] != after[i].labels[p] ? 1 : 0;
            ++total;
        }
    }
    return total ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
}

std::optional<LossReport> monitor_reid(const std::vector<Descriptor>& descs, const RunConfig& cfg,
                                       double l_parsing) {
    const auto f = reid_features(descs);
    ReidHeads heads{IdHead::from_class_means(f.part, f.ids, kIdHeadScale),
                    IdHead::from_class_means(f.fg, f.ids, kIdHeadScale),
                    IdHead::from_class_means(f.global, f.ids, kIdHeadScale)};
    try {
        return reid_objective(descs, heads, cfg.margin, cfg.epsilon, cfg.alpha, l_parsing);
    } catch (const DegenerateInputError&) {
        return std::nullopt;
    }
}

void write_iou(std::ostream& os, const std::string& prefix, const IouMetrics& iou) {
    os << prefix << "fg_iou=" << iou.fg_iou << "\n";
    for (const auto& [k, v] : iou.per_part) {
        os << prefix << "iou." << k << "=" << v << "\n";
    }
    os << prefix << "mean_iou=" << iou.mean_iou << "\n";
}

}  // namespace

PipelineResult run_pipeline(const FeatureMapSet& set, const RunConfig& cfg,
                            const std::optional<LabelSet>& truth,
                            const IntervalObserver& observer) {
    set.validate();
    cfg.validate();
    if (truth) {
        truth->validate();
        if (truth->maps.size() != set.n()) {
            throw ValidationError("truth must hold one label map per feature map");
        }
    }
    const auto schedule = cfg.schedule();

    PipelineResult result;
    std::size_t round = 0;
    auto cluster = [&](const PseudoLabelResult* previous) {
        PseudoLabelOptions opts{cfg.K, mix_seed(cfg.seed, round), nullptr};
        if (previous != nullptr && cfg.warm_start) {
            opts.warm_start = &previous->part_centroids;
        }
        auto labels = generate_pseudo_labels(set, opts);
        result.warnings.insert(result.warnings.end(), labels.warnings.begin(),
                               labels.warnings.end());
        ++round;
        return labels;
    };

    // The first round clusters the raw input maps.
    PseudoLabelResult labels = cluster(nullptr);
    ClassifierTrainer trainer(PartClassifier::zeros(cfg.K, set.c(), cfg.bias),
                              cfg.train_options());
    const std::uint64_t shuffle_seed = mix_seed(cfg.seed, kShuffleStream);

    std::size_t epoch = 0;
    std::size_t interval = 0;
    while (epoch < cfg.total_epochs) {
        IntervalRecord rec;
        rec.interval = interval++;
        const std::size_t end = std::min(cfg.total_epochs, epoch + cfg.reassign_interval);
        for (; epoch < end; ++epoch) {
            rec.lr = lr_at(schedule, epoch);
            rec.train_loss = trainer.train_epoch(set, labels.labels, rec.lr, shuffle_seed, epoch);
        }
        rec.end_epoch = epoch;

        const auto& clf = trainer.classifier();
        std::vector<ConfidenceMaps> conf(set.n());
        std::vector<Descriptor> descs(set.n());
        parallel_for(set.n(), [&](std::size_t i) {
            conf[i] = forward_confidences(clf, set.maps[i]);
            descs[i] = pool_descriptor(conf[i], set.maps[i]);
        });

        std::size_t labeled = 0;
        for (std::size_t i = 0; i < set.n(); ++i) {
            try {
                rec.parsing_loss_sum += parsing_loss(conf[i], labels.labels[i], Reduction::Sum);
                for (auto l : labels.labels[i].labels) labeled += l != kUnlabeled ? 1 : 0;
            } catch (const DegenerateInputError&) {
            }
        }
        rec.parsing_loss_mean = labeled ? rec.parsing_loss_sum / static_cast<double>(labeled) : 0.0;
        rec.reid = monitor_reid(descs, cfg, rec.parsing_loss_mean);

        auto next = cluster(&labels);
        rec.clustering_round = round - 1;
        rec.label_change = label_change(labels.labels, next.labels);
        if (truth) {
            const std::size_t eval_k = std::max(cfg.K, truth->K);
            rec.pseudo_iou = parsing_iou(next.labels, truth->maps, eval_k);
            std::vector<LabelMap> pred;
            pred.reserve(set.n());
            for (std::size_t i = 0; i < set.n(); ++i) {
                pred.push_back(predict_labels(conf[i], set.maps[i].person_id));
            }
            rec.pred_iou = parsing_iou(pred, truth->maps, eval_k);
        }
        labels = std::move(next);
        result.confidences = std::move(conf);
        result.descriptors = std::move(descs);
        if (observer) {
            observer(rec);
        }
        const bool settled = cfg.early_stop && rec.label_change < kEarlyStopChange;
        result.history.push_back(std::move(rec));
        if (settled) {
            break;
        }
    }

    result.classifier = trainer.classifier();
    result.labels = std::move(labels);
    result.clustering_rounds = round;

    const auto split = split_query_gallery(result.descriptors);
    if (!split.query.empty() && !split.gallery.empty()) {
        result.distances = distance_matrix(split.query, split.gallery);
        try {
            result.final_report.retrieval = cmc_map(*result.distances);
        } catch (const ValidationError&) {
            // No query has a cross-camera match; retrieval is not reported.
        }
    }
    if (truth) {
        result.final_report.iou = result.history.back().pred_iou;
    }
    return result;
}

std::string PipelineResult::metrics_text() const {
    std::ostringstream os;
    os.precision(10);
    os << "clustering_rounds=" << clustering_rounds << "\n";
    os << "warnings=" << warnings.size() << "\n";
    for (const auto& r : history) {
        const std::string p = "interval." + std::to_string(r.interval) + ".";
        os << p << "end_epoch=" << r.end_epoch << "\n"
           << p << "clustering_round=" << r.clustering_round << "\n"
           << p << "lr=" << r.lr << "\n"
           << p << "train_loss=" << r.train_loss << "\n"
           << p << "parsing_loss_sum=" << r.parsing_loss_sum << "\n"
           << p << "parsing_loss_mean=" << r.parsing_loss_mean << "\n"
           << p << "label_change=" << r.label_change << "\n";
        if (r.reid) {
            os << p << "l_p=" << r.reid->l_p << "\n"
               << p << "l_f=" << r.reid->l_f << "\n"
               << p << "l_g=" << r.reid->l_g << "\n"
               << p << "l_total=" << r.reid->total << "\n";
        }
        if (r.pseudo_iou) write_iou(os, p + "pseudo.", *r.pseudo_iou);
        if (r.pred_iou) write_iou(os, p + "pred.", *r.pred_iou);
    }
    os << final_report.to_key_values();
    return os.str();
}

void write_pipeline_artifacts(const PipelineResult& result, const RunConfig& cfg,
                              const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    save_label_set(result.labels.as_label_set(cfg.K), dir / "labels.ispl");
    save_classifier(result.classifier, dir / "classifier.ispw");
    save_descriptors(result.descriptors, dir / "descriptors.ispr");
    if (result.distances) {
        save_distance_matrix(*result.distances, dir / "distances.ispd");
    }
    auto write_text = [](const std::filesystem::path& path, const std::string& text) {
        std::ofstream out(path);
        out << text;
        if (!out) throw IoError("write failed: " + path.string());
    };
    write_text(dir / "metrics.txt", result.metrics_text());
    write_text(dir / "config.txt", cfg.to_text());
}

}  // namespace isp
