#include "isp/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

#include "isp/cascade_cluster.hpp"
#include "isp/common.hpp"
#include "isp/config.hpp"
#include "isp/eval.hpp"
#include "isp/matching.hpp"
#include "isp/parsing_head.hpp"
#include "isp/pipeline.hpp"
#include "isp/synthgen.hpp"
#include "isp/tensor.hpp"

namespace isp {

namespace {

std::string kebab(std::string key) {
    for (auto& ch : key) {
        if (ch == '_') ch = '-';
        else ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return "--" + key;
}

// Registers every RunConfig key as a --kebab-case flag on `sub`. Values are
// applied after parsing, on top of an optional --config file.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value run configuration file");
        for (const auto& key : run_config_keys()) {
            sub->add_option(kebab(key), values[key], "overrides config key " + key);
        }
    }

    RunConfig resolve(CLI::App* sub) const {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = load_run_config(config_path);
        }
        for (const auto& key : run_config_keys()) {
            if (sub->count(kebab(key)) > 0) {
                cfg.set(key, values.at(key));
            }
        }
        cfg.validate();
        return cfg;
    }
};

QueryGallerySplit resolve_split(const std::string& desc, const std::string& query,
                                const std::string& gallery) {
    if (!desc.empty()) {
        return split_query_gallery(load_descriptors(desc));
    }
    if (query.empty() || gallery.empty()) {
        throw CLI::ValidationError("need --desc, or both --query and --gallery");
    }
    return {load_descriptors(query), load_descriptors(gallery)};
}

std::vector<std::uint8_t> parse_groups(const std::string& text) {
    // "0,1,1,2" maps raw label i to the i-th entry.
    std::vector<std::uint8_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos
                                                                         : comma - start);
        try {
            const int v = std::stoi(item);
            if (v < 0 || v > 253) throw std::out_of_range("group");
            out.push_back(static_cast<std::uint8_t>(v));
        } catch (const std::exception&) {
            throw ValidationError("--group: invalid entry '" + item + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Identity-guided part parsing: clustering, training, pooling, matching"};
    app.require_subcommand(1);

    // gen
    SyntheticSpec spec;
    std::string gen_out;
    std::string gen_truth;
    auto* gen = app.add_subcommand("gen", "generate a synthetic feature set");
    gen->add_option("--seed", spec.seed);
    gen->add_option("--n-id", spec.n_id);
    gen->add_option("--imgs-per-id", spec.imgs_per_id);
    gen->add_option("--channels", spec.c);
    gen->add_option("--height", spec.h);
    gen->add_option("--width", spec.w);
    gen->add_option("--parts", spec.parts);
    gen->add_option("--occlusion-prob", spec.occlusion_prob);
    gen->add_option("--noise-sigma", spec.noise_sigma);
    gen->add_option("--fg-gain", spec.fg_gain);
    gen->add_option("--identity-spread", spec.identity_spread);
    gen->add_option("--cameras", spec.cameras);
    gen->add_option("--out", gen_out, "ISPF output")->required();
    gen->add_option("--truth", gen_truth, "ISPL ground-truth output");

    // cluster
    std::string cl_in;
    std::string cl_out;
    std::size_t cl_k = 6;
    std::uint64_t cl_seed = 0;
    auto* cl = app.add_subcommand("cluster", "cascaded clustering into pseudo-labels");
    cl->add_option("--in", cl_in, "ISPF input")->required();
    cl->add_option("--k", cl_k, "part count including background");
    cl->add_option("--seed", cl_seed);
    cl->add_option("--out", cl_out, "ISPL output")->required();

    // train
    std::string tr_in;
    std::string tr_labels;
    std::string tr_out;
    ConfigFlags tr_cfg;
    auto* tr = app.add_subcommand("train", "train the part classifier on pseudo-labels");
    tr->add_option("--in", tr_in, "ISPF input")->required();
    tr->add_option("--labels", tr_labels, "ISPL pseudo-labels")->required();
    tr->add_option("--out", tr_out, "ISPW checkpoint")->required();
    tr_cfg.attach(tr);

    // pool
    std::string po_in;
    std::string po_ckpt;
    std::string po_out;
    auto* po = app.add_subcommand("pool", "pool part descriptors");
    po->add_option("--in", po_in, "ISPF input")->required();
    po->add_option("--ckpt", po_ckpt, "ISPW checkpoint")->required();
    po->add_option("--out", po_out, "ISPR descriptor output")->required();

    // match
    std::string ma_desc;
    std::string ma_query;
    std::string ma_gallery;
    std::string ma_out;
    std::string ma_tsv;
    auto* ma = app.add_subcommand("match", "aligned distance matrix");
    ma->add_option("--desc", ma_desc, "single ISPR file; first image per identity is a query");
    ma->add_option("--query", ma_query, "ISPR queries");
    ma->add_option("--gallery", ma_gallery, "ISPR gallery");
    ma->add_option("--out", ma_out, "ISPD output");
    ma->add_option("--tsv", ma_tsv, "TSV output");

    // eval
    std::string ev_pred;
    std::string ev_truth;
    std::string ev_group;
    std::string ev_dist;
    std::string ev_desc;
    std::string ev_query;
    std::string ev_gallery;
    bool ev_text = false;
    auto* ev = app.add_subcommand("eval", "IoU of label maps, or CMC/mAP of a distance matrix");
    ev->add_option("--pred", ev_pred, "ISPL prediction");
    ev->add_option("--truth", ev_truth, "ISPL ground truth");
    ev->add_option("--group", ev_group, "comma-separated label remapping, e.g. 0,1,1,2");
    ev->add_option("--dist", ev_dist, "ISPD distance matrix");
    ev->add_option("--desc", ev_desc, "ISPR used to build --dist (single-file split)");
    ev->add_option("--query", ev_query, "ISPR queries used to build --dist");
    ev->add_option("--gallery", ev_gallery, "ISPR gallery used to build --dist");
    ev->add_flag("--text", ev_text, "human-readable output instead of key=value");

    // pipeline
    std::string pl_in;
    std::string pl_truth;
    std::string pl_out;
    bool pl_quiet = false;
    ConfigFlags pl_cfg;
    auto* pl = app.add_subcommand("pipeline", "full cluster/train loop with evaluation");
    pl->add_option("--in", pl_in, "ISPF input")->required();
    pl->add_option("--truth", pl_truth, "ISPL ground truth for IoU tracking");
    pl->add_option("--out-dir", pl_out, "artifact directory")->required();
    pl->add_flag("--quiet", pl_quiet, "no per-interval progress");
    pl_cfg.attach(pl);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands()[0]) {
            err << sub->help();
        } else {
            err << app.help();
        }
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            const auto data = generate(spec);
            save_feature_set(data.set, gen_out);
            if (!gen_truth.empty()) {
                save_label_set(data.truth, gen_truth);
            }
            out << "wrote " << data.set.n() << " maps (" << spec.n_id << " identities) to "
                << gen_out << "\n";
        } else if (cl->parsed()) {
            const auto set = load_feature_set(cl_in);
            const auto res = generate_pseudo_labels(set, {cl_k, cl_seed, nullptr});
            for (const auto& w : res.warnings) {
                err << "warning: person " << w.person_id << ": " << to_string(w.kind) << ": "
                    << w.message << "\n";
            }
            save_label_set(res.as_label_set(cl_k), cl_out);
            out << "wrote " << res.labels.size() << " label maps to " << cl_out << "\n";
        } else if (tr->parsed()) {
            const auto cfg = tr_cfg.resolve(tr);
            const auto set = load_feature_set(tr_in);
            const auto labels = load_label_set(tr_labels);
            if (labels.K != cfg.K) {
                throw ValidationError("labels were made with K=" + std::to_string(labels.K) +
                                      " but the config says K=" + std::to_string(cfg.K));
            }
            const auto res = train_classifier(PartClassifier::zeros(cfg.K, set.c(), cfg.bias), set,
                                              labels.maps, cfg.schedule(), cfg.total_epochs,
                                              cfg.seed, cfg.train_options());
            save_classifier(res.classifier, tr_out);
            out << "final mean parsing loss " << res.loss_history.back() << "\n";
        } else if (po->parsed()) {
            const auto set = load_feature_set(po_in);
            const auto clf = load_classifier(po_ckpt);
            std::vector<Descriptor> descs(set.n());
            parallel_for(set.n(), [&](std::size_t i) { descs[i] = pool_descriptor(clf, set.maps[i]); });
            save_descriptors(descs, po_out);
            out << "wrote " << descs.size() << " descriptors to " << po_out << "\n";
        } else if (ma->parsed()) {
            if (ma_out.empty() && ma_tsv.empty()) {
                throw CLI::ValidationError("match needs --out and/or --tsv");
            }
            const auto split = resolve_split(ma_desc, ma_query, ma_gallery);
            const auto dm = distance_matrix(split.query, split.gallery);
            if (!ma_out.empty()) save_distance_matrix(dm, ma_out);
            if (!ma_tsv.empty()) save_distance_tsv(dm, ma_tsv);
            out << "distance matrix " << dm.q << "x" << dm.g << "\n";
        } else if (ev->parsed()) {
            MetricReport report;
            if (!ev_pred.empty() || !ev_truth.empty()) {
                if (ev_pred.empty() || ev_truth.empty()) {
                    throw CLI::ValidationError("label evaluation needs --pred and --truth");
                }
                const auto pred = load_label_set(ev_pred);
                const auto truth = load_label_set(ev_truth);
                std::optional<std::vector<std::uint8_t>> group;
                if (!ev_group.empty()) group = parse_groups(ev_group);
                report.iou = parsing_iou(pred.maps, truth.maps, std::max(pred.K, truth.K),
                                         group ? &*group : nullptr);
            }
            if (!ev_dist.empty()) {
                auto dm = load_distance_matrix(ev_dist);
                const auto split = resolve_split(ev_desc, ev_query, ev_gallery);
                if (split.query.size() != dm.q || split.gallery.size() != dm.g) {
                    throw ValidationError("descriptor files do not match the distance matrix shape");
                }
                for (const auto& d : split.query) dm.query.push_back({d.image_id, d.person_id, d.camera_id});
                for (const auto& d : split.gallery) dm.gallery.push_back({d.image_id, d.person_id, d.camera_id});
                report.retrieval = cmc_map(dm);
                if (report.retrieval->skipped > 0) {
                    err << "warning: " << report.retrieval->skipped
                        << " queries had no valid match and were excluded\n";
                }
            }
            if (!report.iou && !report.retrieval) {
                throw CLI::ValidationError("eval needs --pred/--truth or --dist");
            }
            out << (ev_text ? report.to_text() : report.to_key_values());
        } else if (pl->parsed()) {
            const auto cfg = pl_cfg.resolve(pl);
            const auto set = load_feature_set(pl_in);
            std::optional<LabelSet> truth;
            if (!pl_truth.empty()) truth = load_label_set(pl_truth);
            IntervalObserver progress;
            if (!pl_quiet) {
                progress = [&](const IntervalRecord& r) {
                    out << "epoch " << r.end_epoch << "  lr " << r.lr << "  loss " << r.train_loss
                        << "  relabeled " << r.label_change;
                    if (r.pred_iou) out << "  fg_iou " << r.pred_iou->fg_iou;
                    out << "\n";
                };
            }
            const auto res = run_pipeline(set, cfg, truth, progress);
            write_pipeline_artifacts(res, cfg, pl_out);
            out << res.final_report.to_text();
        }
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}

}  // namespace isp
