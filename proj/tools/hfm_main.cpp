// Command-line front end: thin verbs over the library pipeline.
// Exit codes: 0 ok, 1 config/usage error, 2 training failure, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hfm/errors.hpp"
#include "hfm/experiment.hpp"
#include "hfm/flow_infer.hpp"

namespace fs = std::filesystem;
using namespace hfm;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    return out;
}

struct Prepared {
    FeatureDataset ds;
    FeatureDataset support;
    FeatureDataset test;
};

Prepared prepare_data(const ExperimentConfig& cfg) {
    FeatureDataset ds;
    if (!cfg.input_path.empty()) {
        ds = cfg.input_path.ends_with(".csv") ? read_feature_csv(cfg.input_path)
                                              : read_feature_file(cfg.input_path);
    } else {
        SyntheticConfig s = cfg.synth;
        s.seed = cfg.seed;
        ds = generate_synthetic(s);
    }
    auto [support, test] = split_k_shot(ds, cfg.shots, cfg.seed + 1);
    return {std::move(ds), std::move(support), std::move(test)};
}

AlignmentResult run_align_stage(const Prepared& prep, const ExperimentConfig& cfg) {
    AlignmentConfig acfg = cfg.align;
    acfg.seed = cfg.seed + 2;
    return run_alignment(prep.support.features, prep.support.labels,
                         prep.ds.prototypes, acfg);
}

int cmd_synth(const ExperimentConfig& cfg) {
    SyntheticConfig s = cfg.synth;
    s.seed = cfg.seed;
    auto ds = generate_synthetic(s);
    fs::create_directories(cfg.out_dir);
    const fs::path path = fs::path(cfg.out_dir) / "dataset.hfmf";
    write_feature_file(path.string(), ds);
    std::cout << "wrote " << path.string() << " (" << ds.prototypes.size()
              << " classes, dim " << ds.features.front().size() << ", "
              << ds.features.size() << " samples)\n";
    return 0;
}

int cmd_align(const ExperimentConfig& cfg) {
    auto prep = prepare_data(cfg);
    auto ar = run_align_stage(prep, cfg);
    fs::create_directories(cfg.out_dir);
    const fs::path path = fs::path(cfg.out_dir) / "alignment_trace.csv";
    auto out = open_out(path);
    out << "epoch,contrastive,entailment,total\n";
    for (const auto& e : ar.trace)
        out << e.epoch << ',' << fmt17(e.contrastive) << ',' << fmt17(e.entailment)
            << ',' << fmt17(e.total) << "\n";
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());

    const auto& emb = ar.embedding;
    std::cout << "alignment done: kappa " << emb.kappa << ", alpha_txt "
              << emb.scales.alpha_txt << ", alpha_img " << emb.scales.alpha_img
              << ", d_txt " << emb.prototypes.d_txt << "\n";
    std::cout << "final loss " << ar.trace.back().total << " (contrastive "
              << ar.trace.back().contrastive << ", entailment "
              << ar.trace.back().entailment << ")\n";
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    auto prep = prepare_data(cfg);
    auto ar = run_align_stage(prep, cfg);
    FlowTrainConfig fcfg = cfg.flow;
    fcfg.seed = cfg.seed + 3;
    auto tr = train_flow(ar.embedding, fcfg);
    fs::create_directories(cfg.out_dir);
    const fs::path trace_path = fs::path(cfg.out_dir) / "loss_trace.csv";
    const fs::path ckpt_path = fs::path(cfg.out_dir) / "velocity_net.hfmp";
    write_loss_trace_csv(trace_path.string(), tr.trace);
    save_checkpoint(tr.net, ckpt_path.string());
    std::cout << "training done: final total " << tr.trace.total.back() << " (L_step "
              << tr.trace.step_loss.back() << ", L_icd " << tr.trace.icd_loss.back()
              << ")\n";
    std::cout << "wrote " << trace_path.string() << " and " << ckpt_path.string()
              << "\n";
    return 0;
}

int cmd_infer(const ExperimentConfig& cfg, std::string checkpoint) {
    if (checkpoint.empty())
        checkpoint = (fs::path(cfg.out_dir) / "velocity_net.hfmp").string();
    auto prep = prepare_data(cfg);
    auto ar = run_align_stage(prep, cfg);
    const auto& emb = ar.embedding;
    const Curvature k(emb.kappa);
    VelocityNet net = load_checkpoint(checkpoint);
    if (net.config().io_dim != emb.dim + 1)
        throw std::invalid_argument("checkpoint width does not match the dataset");

    fs::create_directories(cfg.out_dir);
    const fs::path path = fs::path(cfg.out_dir) / "predictions.csv";
    auto out = open_out(path);
    out << "id,true,predicted,t_star,stop_reason";
    for (std::size_t c = 0; c < emb.prototypes.points.size(); ++c)
        out << ",score_" << c;
    out << "\n";

    std::size_t correct = 0;
    std::size_t hits = 0;
    double t_sum = 0.0;
    for (std::size_t i = 0; i < prep.test.features.size(); ++i) {
        LorentzPoint x0 = embed_image(emb, prep.test.features[i]);
        auto traj = transport_with_stopping(net, x0, emb.prototypes, cfg.flow.delta, k);
        auto [pred, scores] = classify(traj, emb.prototypes, k);
        const double t_star = traj.times[traj.stop_index];
        if (pred == prep.test.labels[i]) correct += 1;
        if (traj.reason == StopReason::threshold_hit) hits += 1;
        t_sum += t_star;
        out << i << ',' << prep.test.labels[i] << ',' << pred << ',' << fmt17(t_star)
            << ','
            << (traj.reason == StopReason::threshold_hit ? "threshold_hit" : "horizon");
        for (double s : scores) out << ',' << fmt17(s);
        out << "\n";
    }
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());

    const double n = static_cast<double>(prep.test.features.size());
    std::cout << "accuracy " << (static_cast<double>(correct) / n) << ", mean t* "
              << (t_sum / n) << ", threshold-hit rate "
              << (static_cast<double>(hits) / n) << "\n";
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_bench(const ExperimentConfig& cfg) {
    auto res = run_experiment(cfg);
    std::cout << "nearest-prototype accuracy " << res.nearest_prototype_accuracy << "\n";
    if (!cfg.baseline_only)
        std::cout << "hyperbolic: accuracy " << res.accuracy << ", mean t* "
                  << res.mean_t_star << ", corridor violation "
                  << res.report.corridor_violation_rate << ", crossings "
                  << res.report.crossing_count << ", threshold-hit rate "
                  << res.threshold_hit_rate << "\n";
    if (cfg.run_baseline)
        std::cout << "baseline:   accuracy " << res.baseline_accuracy << ", mean t* "
                  << res.baseline_mean_t_star << ", corridor violation "
                  << res.baseline_report.corridor_violation_rate << ", crossings "
                  << res.baseline_report.crossing_count << ", threshold-hit rate "
                  << res.baseline_threshold_hit_rate << "\n";
    std::cout << "metrics at " << res.metrics_path << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& paths) {
    auto load = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot open " + p);
        return nlohmann::json::parse(in);
    };
    nlohmann::json a = load(paths[0]);
    nlohmann::json b = load(paths[1]);
    std::printf("%-36s %16s %16s\n", "key", "run A", "run B");
    for (auto it = a.begin(); it != a.end(); ++it) {
        if (!it->is_number()) continue;
        const double va = it->get<double>();
        if (b.contains(it.key()) && b[it.key()].is_number()) {
            const double vb = b[it.key()].get<double>();
            std::printf("%-36s %16.6g %16.6g%s\n", it.key().c_str(), va, vb,
                        va == vb ? "" : "  *");
        } else {
            std::printf("%-36s %16.6g %16s\n", it.key().c_str(), va, "-");
        }
    }
    for (auto it = b.begin(); it != b.end(); ++it)
        if (it->is_number() && !a.contains(it.key()))
            std::printf("%-36s %16s %16.6g\n", it.key().c_str(), "-",
                        it->get<double>());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperbolic flow matching workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir_cli;
    std::string checkpoint;
    unsigned long long seed_cli = 0;
    bool baseline_only = false;
    bool no_baseline = false;
    std::vector<std::string> cmp_paths;

    auto* opt_config =
        app.add_option("--config", config_path, "flat key=value config file")
            ->check(CLI::ExistingFile);
    auto* opt_seed = app.add_option("--seed", seed_cli, "master seed override");
    auto* opt_out = app.add_option("--out-dir", out_dir_cli, "artifact directory");

    auto* sc_synth = app.add_subcommand("synth", "generate and store a synthetic dataset");
    auto* sc_align = app.add_subcommand("align", "fit the hierarchy alignment stage");
    auto* sc_train = app.add_subcommand("train", "alignment plus velocity-field training");
    auto* sc_infer = app.add_subcommand("infer", "transport inference from a checkpoint");
    auto* sc_bench =
        app.add_subcommand("bench", "full benchmark with the Euclidean baseline");
    auto* sc_comp = app.add_subcommand("compare", "diff two metrics.json files");

    sc_infer->add_option("--checkpoint", checkpoint, "velocity-field checkpoint");
    sc_bench->add_flag("--baseline-only", baseline_only,
                       "skip the hyperbolic pipeline");
    sc_bench->add_flag("--no-baseline", no_baseline, "skip the Euclidean baseline");
    sc_comp->add_option("metrics", cmp_paths, "two metrics.json files")
        ->expected(2)
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg;
        if (opt_config->count()) cfg = parse_experiment_config(config_path);
        if (opt_seed->count()) cfg.seed = seed_cli;
        if (opt_out->count()) cfg.out_dir = out_dir_cli;
        if (baseline_only) cfg.baseline_only = true;
        if (no_baseline) cfg.run_baseline = false;

        if (app.got_subcommand(sc_synth)) return cmd_synth(cfg);
        if (app.got_subcommand(sc_align)) return cmd_align(cfg);
        if (app.got_subcommand(sc_train)) return cmd_train(cfg);
        if (app.got_subcommand(sc_infer)) return cmd_infer(cfg, checkpoint);
        if (app.got_subcommand(sc_bench)) return cmd_bench(cfg);
        if (app.got_subcommand(sc_comp)) return cmd_compare(cmp_paths);
        return 1;
    } catch (const TrainingFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
