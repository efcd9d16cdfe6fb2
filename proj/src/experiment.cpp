#include "hfm/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "hfm/errors.hpp"
#include "hfm/flow_infer.hpp"

namespace fs = std::filesystem;

namespace hfm {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) bad_value(key, value);
        return v;
    } catch (const std::invalid_argument&) {
        bad_value(key, value);
    } catch (const std::out_of_range&) {
        bad_value(key, value);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        if (!value.empty() && value[0] == '-') bad_value(key, value);
        unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) bad_value(key, value);
        return v;
    } catch (const std::invalid_argument&) {
        bad_value(key, value);
    } catch (const std::out_of_range&) {
        bad_value(key, value);
    }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(parse_u64(key, value));
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value);
}

template <class F>
decltype(auto) stage(const char* name, F&& f) {
    try {
        return std::forward<F>(f)();
    } catch (const std::exception& e) {
        std::cerr << "stage " << name << " failed: " << e.what() << "\n";
        throw;
    }
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* reason_name(StopReason r) {
    return r == StopReason::threshold_hit ? "threshold_hit" : "horizon";
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    return out;
}

void finish_out(std::ofstream& out, const fs::path& p) {
    out.flush();
    if (!out) throw IoError("write failed for " + p.string());
}

void write_predictions_csv(const fs::path& path, const std::vector<int>& truth,
                           const std::vector<int>& preds,
                           const std::vector<double>& t_star,
                           const std::vector<StopReason>& reasons,
                           const std::vector<std::vector<double>>& scores) {
    auto out = open_out(path);
    out << "id,true,predicted,t_star,stop_reason";
    for (std::size_t c = 0; c < scores.front().size(); ++c) out << ",score_" << c;
    out << "\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
        out << i << ',' << truth[i] << ',' << preds[i] << ',' << fmt17(t_star[i])
            << ',' << reason_name(reasons[i]);
        for (double s : scores[i]) out << ',' << fmt17(s);
        out << "\n";
    }
    finish_out(out, path);
}

void write_trajectories_csv(const fs::path& path, const std::vector<Polyline>& lines,
                            const std::vector<std::vector<double>>& times,
                            const std::vector<int>& labels) {
    auto out = open_out(path);
    out << "traj,label,step,t";
    for (std::size_t c = 0; c < lines.front().front().size(); ++c) out << ",c" << c;
    out << "\n";
    for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t s = 0; s < lines[i].size(); ++s) {
            out << i << ',' << labels[i] << ',' << s << ',' << fmt17(times[i][s]);
            for (double c : lines[i][s]) out << ',' << fmt17(c);
            out << "\n";
        }
    finish_out(out, path);
}

} // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
    if (key == "dataset.input")
        cfg.input_path = value;
    else if (key == "dataset.classes")
        cfg.synth.n_classes = parse_size(key, value);
    else if (key == "dataset.dim")
        cfg.synth.dim = parse_size(key, value);
    else if (key == "dataset.samples_per_class")
        cfg.synth.samples_per_class = parse_size(key, value);
    else if (key == "dataset.sigma")
        cfg.synth.sigma = parse_double(key, value);
    else if (key == "dataset.center_distance")
        cfg.synth.center_distance = parse_double(key, value);
    else if (key == "dataset.overlap")
        cfg.synth.overlap = parse_double(key, value);
    else if (key == "dataset.prototype_offset")
        cfg.synth.prototype_offset_sigma = parse_double(key, value);
    else if (key == "shots")
        cfg.shots = parse_size(key, value);
    else if (key == "align.H")
        cfg.align.H = parse_double(key, value);
    else if (key == "align.tau")
        cfg.align.tau = parse_double(key, value);
    else if (key == "align.beta")
        cfg.align.beta = parse_double(key, value);
    else if (key == "align.lr")
        cfg.align.lr = parse_double(key, value);
    else if (key == "align.epochs")
        cfg.align.epochs = parse_size(key, value);
    else if (key == "align.alpha_img")
        cfg.align.alpha_img_init = parse_double(key, value);
    else if (key == "align.kappa")
        cfg.align.kappa_init = parse_double(key, value);
    else if (key == "flow.delta")
        cfg.flow.delta = parse_double(key, value);
    else if (key == "flow.lambda")
        cfg.flow.lambda = parse_double(key, value);
    else if (key == "flow.tau")
        cfg.flow.tau = parse_double(key, value);
    else if (key == "flow.epochs")
        cfg.flow.epochs = parse_size(key, value);
    else if (key == "flow.batch")
        cfg.flow.batch = parse_size(key, value);
    else if (key == "flow.lr")
        cfg.flow.lr = parse_double(key, value);
    else if (key == "flow.horizon")
        cfg.flow.horizon = parse_size(key, value);
    else if (key == "flow.weight_decay")
        cfg.flow.weight_decay = parse_double(key, value);
    else if (key == "flow.width")
        cfg.flow.width = parse_size(key, value);
    else if (key == "flow.blocks")
        cfg.flow.blocks = parse_size(key, value);
    else if (key == "flow.time_dim")
        cfg.flow.time_dim = parse_size(key, value);
    else if (key == "flow.baseline_icd")
        cfg.flow.baseline_icd = parse_bool(key, value);
    else if (key == "out_dir")
        cfg.out_dir = value;
    else if (key == "seed")
        cfg.seed = parse_u64(key, value);
    else if (key == "baseline")
        cfg.run_baseline = parse_bool(key, value);
    else if (key == "baseline_only")
        cfg.baseline_only = parse_bool(key, value);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value at line " +
                                        std::to_string(lineno));
        apply_config_entry(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.baseline_only && !cfg.run_baseline)
        throw std::invalid_argument("config: baseline_only with the baseline disabled");
    if (cfg.shots == 0) throw std::invalid_argument("config: shots must be positive");

    const fs::path out_dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
    stage("artifacts", [&] { fs::create_directories(out_dir); });

    FeatureDataset ds = stage("data", [&] {
        if (!cfg.input_path.empty()) {
            if (cfg.input_path.ends_with(".csv")) return read_feature_csv(cfg.input_path);
            return read_feature_file(cfg.input_path);
        }
        SyntheticConfig s = cfg.synth;
        s.seed = cfg.seed;
        return generate_synthetic(s);
    });

    auto [support, test] =
        stage("split", [&] { return split_k_shot(ds, cfg.shots, cfg.seed + 1); });

    ExperimentResult res;
    res.nearest_prototype_accuracy =
        nearest_prototype_accuracy(test.features, test.labels, ds.prototypes);

    nlohmann::json metrics;
    metrics["delta"] = cfg.flow.delta;
    metrics["lambda"] = cfg.flow.lambda;
    metrics["tau"] = cfg.flow.tau;
    metrics["seed"] = cfg.seed;
    metrics["shots"] = cfg.shots;
    metrics["n_classes"] = ds.prototypes.size();
    metrics["dim"] = ds.features.front().size();
    metrics["nearest_prototype_accuracy"] = res.nearest_prototype_accuracy;

    std::vector<TrajectoryPanel> panels;
    const std::uint64_t projection_seed = cfg.seed + 4;

    if (!cfg.baseline_only) {
        AlignmentConfig acfg = cfg.align;
        acfg.seed = cfg.seed + 2;
        AlignmentResult ar = stage("align", [&] {
            return run_alignment(support.features, support.labels, ds.prototypes, acfg);
        });
        const AlignedEmbedding& emb = ar.embedding;
        const Curvature k(emb.kappa);

        FlowTrainConfig fcfg = cfg.flow;
        fcfg.seed = cfg.seed + 3;
        FlowTrainResult tr = stage("flow-train", [&] { return train_flow(emb, fcfg); });

        std::vector<Trajectory> trajs;
        std::vector<int> preds;
        std::vector<double> t_star;
        std::vector<StopReason> reasons;
        std::vector<std::vector<double>> all_scores;
        stage("inference", [&] {
            trajs.reserve(test.features.size());
            for (std::size_t i = 0; i < test.features.size(); ++i) {
                LorentzPoint x0 = embed_image(emb, test.features[i]);
                trajs.push_back(
                    transport_with_stopping(tr.net, x0, emb.prototypes, fcfg.delta, k));
                auto [pred, scores] = classify(trajs.back(), emb.prototypes, k);
                preds.push_back(pred);
                all_scores.push_back(std::move(scores));
                t_star.push_back(trajs.back().times[trajs.back().stop_index]);
                reasons.push_back(trajs.back().reason);
            }
        });

        std::size_t hits = 0;
        std::size_t correct = 0;
        double t_sum = 0.0;
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            if (reasons[i] == StopReason::threshold_hit) hits += 1;
            if (preds[i] == test.labels[i]) correct += 1;
            t_sum += t_star[i];
        }
        const double n_test = static_cast<double>(trajs.size());
        res.accuracy = static_cast<double>(correct) / n_test;
        res.mean_t_star = t_sum / n_test;
        res.threshold_hit_rate = static_cast<double>(hits) / n_test;
        res.d_txt = emb.prototypes.d_txt;
        res.threshold =
            stopping_threshold(emb.prototypes.points.size(), emb.prototypes.d_txt);
        res.report = stage("diagnostics", [&] {
            return entanglement_report(trajs, emb.prototypes, test.labels, k,
                                       projection_seed);
        });

        stage("artifacts", [&] {
            write_loss_trace_csv((out_dir / "loss_trace.csv").string(), tr.trace);
            save_checkpoint(tr.net, (out_dir / "velocity_net.hfmp").string());
            write_predictions_csv(out_dir / "predictions.csv", test.labels, preds,
                                  t_star, reasons, all_scores);
            std::vector<Polyline> lines;
            std::vector<std::vector<double>> times;
            lines.reserve(trajs.size());
            for (const auto& t : trajs) {
                Polyline line;
                for (const auto& st : t.states) line.push_back(st.ambient);
                lines.push_back(std::move(line));
                times.push_back(t.times);
            }
            write_trajectories_csv(out_dir / "trajectories.csv", lines, times,
                                   test.labels);
        });

        panels.push_back({"hyperbolic transport",
                          project_polylines(spatial_polylines(trajs), projection_seed),
                          test.labels});

        metrics["accuracy"] = res.accuracy;
        metrics["mean_t_star"] = res.mean_t_star;
        metrics["threshold_hit_rate"] = res.threshold_hit_rate;
        metrics["corridor_violation_rate"] = res.report.corridor_violation_rate;
        metrics["crossing_count"] = res.report.crossing_count;
        metrics["per_class_violation"] = res.report.per_class_rate;
        metrics["d_txt"] = res.d_txt;
        metrics["stopping_threshold"] = res.threshold;
        metrics["final_step_loss"] = tr.trace.step_loss.back();
        metrics["final_icd_loss"] = tr.trace.icd_loss.back();
        metrics["final_total_loss"] = tr.trace.total.back();
        metrics["loss_trace_path"] = "loss_trace.csv";
        metrics["predictions_path"] = "predictions.csv";
        metrics["trajectories_path"] = "trajectories.csv";
        metrics["checkpoint_path"] = "velocity_net.hfmp";
    }

    if (cfg.run_baseline) {
        FlowTrainConfig fcfg = cfg.flow;
        fcfg.seed = cfg.seed + 3;
        FlowTrainResult btr = stage("baseline-train", [&] {
            return train_euclidean_baseline(support.features, support.labels,
                                            ds.prototypes, fcfg);
        });

        const double bthreshold =
            stopping_threshold(ds.prototypes.size(), euclidean_diameter(ds.prototypes));
        std::vector<EuclideanTrajectory> btrajs;
        std::vector<int> bpreds;
        std::vector<double> bt_star;
        std::vector<StopReason> breasons;
        std::vector<std::vector<double>> bscores;
        stage("baseline-inference", [&] {
            btrajs.reserve(test.features.size());
            for (std::size_t i = 0; i < test.features.size(); ++i) {
                btrajs.push_back(euclidean_transport(btr.net, test.features[i],
                                                     ds.prototypes, fcfg.delta,
                                                     bthreshold));
                auto [pred, scores] = euclidean_classify(btrajs.back(), ds.prototypes);
                bpreds.push_back(pred);
                bscores.push_back(std::move(scores));
                bt_star.push_back(btrajs.back().times[btrajs.back().stop_index]);
                breasons.push_back(btrajs.back().reason);
            }
        });

        std::size_t hits = 0;
        std::size_t correct = 0;
        double t_sum = 0.0;
        for (std::size_t i = 0; i < btrajs.size(); ++i) {
            if (breasons[i] == StopReason::threshold_hit) hits += 1;
            if (bpreds[i] == test.labels[i]) correct += 1;
            t_sum += bt_star[i];
        }
        const double n_test = static_cast<double>(btrajs.size());
        res.baseline_accuracy = static_cast<double>(correct) / n_test;
        res.baseline_mean_t_star = t_sum / n_test;
        res.baseline_threshold_hit_rate = static_cast<double>(hits) / n_test;
        res.baseline_threshold = bthreshold;
        res.baseline_report = stage("baseline-diagnostics", [&] {
            return euclidean_entanglement_report(btrajs, ds.prototypes, test.labels,
                                                 projection_seed);
        });

        stage("artifacts", [&] {
            write_loss_trace_csv((out_dir / "baseline_loss_trace.csv").string(),
                                 btr.trace);
            save_checkpoint(btr.net, (out_dir / "baseline_net.hfmp").string());
            write_predictions_csv(out_dir / "baseline_predictions.csv", test.labels,
                                  bpreds, bt_star, breasons, bscores);
            std::vector<Polyline> lines;
            std::vector<std::vector<double>> times;
            lines.reserve(btrajs.size());
            for (const auto& t : btrajs) {
                lines.push_back(t.states);
                times.push_back(t.times);
            }
            write_trajectories_csv(out_dir / "baseline_trajectories.csv", lines, times,
                                   test.labels);
        });

        panels.push_back({"euclidean baseline",
                          project_polylines(ambient_polylines(btrajs), projection_seed),
                          test.labels});

        metrics["baseline_accuracy"] = res.baseline_accuracy;
        metrics["baseline_mean_t_star"] = res.baseline_mean_t_star;
        metrics["baseline_threshold_hit_rate"] = res.baseline_threshold_hit_rate;
        metrics["baseline_corridor_violation_rate"] =
            res.baseline_report.corridor_violation_rate;
        metrics["baseline_crossing_count"] = res.baseline_report.crossing_count;
        metrics["baseline_stopping_threshold"] = bthreshold;
        metrics["baseline_loss_trace_path"] = "baseline_loss_trace.csv";
        metrics["baseline_predictions_path"] = "baseline_predictions.csv";
        metrics["baseline_trajectories_path"] = "baseline_trajectories.csv";
        metrics["baseline_checkpoint_path"] = "baseline_net.hfmp";
    }

    stage("artifacts", [&] {
        write_trajectory_svg((out_dir / "trajectories.svg").string(), panels);
        metrics["figure_path"] = "trajectories.svg";
        const fs::path mpath = out_dir / "metrics.json";
        auto out = open_out(mpath);
        out << metrics.dump(2) << "\n";
        finish_out(out, mpath);
        res.metrics_path = mpath.string();
    });
    return res;
}

} // namespace hfm
