#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "hfm/errors.hpp"
#include "hfm/experiment.hpp"

using namespace hfm;
namespace fs = std::filesystem;

namespace {

// small enough to keep the whole orchestration under a second
ExperimentConfig tiny_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.synth.n_classes = 3;
    cfg.synth.dim = 6;
    cfg.synth.samples_per_class = 6;
    cfg.shots = 2;
    cfg.align.epochs = 40;
    cfg.flow.epochs = 30;
    cfg.flow.width = 32;
    cfg.flow.blocks = 1;
    cfg.flow.time_dim = 8;
    cfg.out_dir = out_dir;
    return cfg;
}

fs::path temp_dir(const char* name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json load_metrics(const fs::path& dir) {
    return nlohmann::json::parse(slurp(dir / "metrics.json"));
}

struct CerrCapture {
    std::ostringstream buf;
    std::streambuf* old = std::cerr.rdbuf(buf.rdbuf());
    ~CerrCapture() { std::cerr.rdbuf(old); }
    std::string text() const { return buf.str(); }
};

} // namespace

TEST_CASE("experiment config defaults match the benchmark shape") {
    ExperimentConfig cfg;
    CHECK(cfg.synth.n_classes == 8);
    CHECK(cfg.synth.dim == 16);
    CHECK(cfg.synth.overlap == 1.0);
    CHECK(cfg.synth.sigma == 0.24);
    CHECK(cfg.align.lr == 0.001);
    CHECK(cfg.align.epochs == 200);
    CHECK(cfg.flow.epochs == 1000);
    CHECK(cfg.flow.lr == 4e-4);
    CHECK(cfg.shots == 4);
    CHECK(cfg.seed == 0);
    CHECK(cfg.run_baseline);
    CHECK_FALSE(cfg.baseline_only);
}

TEST_CASE("config entries reach their fields") {
    ExperimentConfig cfg;
    apply_config_entry(cfg, "dataset.classes", "5");
    apply_config_entry(cfg, "dataset.dim", "12");
    apply_config_entry(cfg, "dataset.sigma", "0.25");
    apply_config_entry(cfg, "dataset.overlap", "0.5");
    apply_config_entry(cfg, "dataset.input", "some/file.csv");
    apply_config_entry(cfg, "shots", "3");
    apply_config_entry(cfg, "align.H", "0.2");
    apply_config_entry(cfg, "align.kappa", "2.0");
    apply_config_entry(cfg, "flow.delta", "0.2");
    apply_config_entry(cfg, "flow.lambda", "0.05");
    apply_config_entry(cfg, "flow.epochs", "123");
    apply_config_entry(cfg, "flow.baseline_icd", "true");
    apply_config_entry(cfg, "out_dir", "elsewhere");
    apply_config_entry(cfg, "seed", "17");
    apply_config_entry(cfg, "baseline", "false");
    CHECK(cfg.synth.n_classes == 5);
    CHECK(cfg.synth.dim == 12);
    CHECK(cfg.synth.sigma == 0.25);
    CHECK(cfg.synth.overlap == 0.5);
    CHECK(cfg.input_path == "some/file.csv");
    CHECK(cfg.shots == 3);
    CHECK(cfg.align.H == 0.2);
    CHECK(cfg.align.kappa_init == 2.0);
    CHECK(cfg.flow.delta == 0.2);
    CHECK(cfg.flow.lambda == 0.05);
    CHECK(cfg.flow.epochs == 123);
    CHECK(cfg.flow.baseline_icd);
    CHECK(cfg.out_dir == "elsewhere");
    CHECK(cfg.seed == 17);
    CHECK_FALSE(cfg.run_baseline);
}

TEST_CASE("config rejects unknown keys and bad values") {
    ExperimentConfig cfg;
    CHECK_THROWS_AS(apply_config_entry(cfg, "flow.delt", "0.1"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_entry(cfg, "flow.delta", "abc"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_entry(cfg, "flow.delta", "0.1x"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_entry(cfg, "seed", "-3"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_entry(cfg, "baseline", "maybe"), std::invalid_argument);
}

TEST_CASE("config files parse with comments and whitespace") {
    auto path = fs::temp_directory_path() / "hfm_exp.cfg";
    {
        std::ofstream out(path);
        out << "# benchmark shape\n";
        out << "\n";
        out << "dataset.classes = 4\n";
        out << "  flow.lr=0.001\n";
        out << "out_dir = run1   \n";
    }
    auto cfg = parse_experiment_config(path.string());
    CHECK(cfg.synth.n_classes == 4);
    CHECK(cfg.flow.lr == 0.001);
    CHECK(cfg.out_dir == "run1");

    std::ofstream(path) << "dataset.classes 4\n";
    CHECK_THROWS_AS(parse_experiment_config(path.string()), std::invalid_argument);
    fs::remove(path);
    CHECK_THROWS_AS(parse_experiment_config(path.string()), IoError);
}

TEST_CASE("run_experiment emits the full artifact set") {
    auto dir = temp_dir("hfm_exp_run");
    auto cfg = tiny_config(dir.string());
    auto res = run_experiment(cfg);

    for (const char* name :
         {"metrics.json", "loss_trace.csv", "predictions.csv", "trajectories.csv",
          "velocity_net.hfmp", "baseline_loss_trace.csv", "baseline_predictions.csv",
          "baseline_trajectories.csv", "baseline_net.hfmp", "trajectories.svg"})
        CHECK(fs::exists(dir / name));

    auto m = load_metrics(dir);
    for (const char* key :
         {"accuracy", "mean_t_star", "corridor_violation_rate", "crossing_count",
          "loss_trace_path", "baseline_accuracy", "baseline_corridor_violation_rate",
          "nearest_prototype_accuracy", "threshold_hit_rate", "lambda", "seed"})
        CHECK(m.contains(key));

    CHECK(m["accuracy"].get<double>() == res.accuracy);
    CHECK(m["accuracy"].get<double>() >= 0.0);
    CHECK(m["accuracy"].get<double>() <= 1.0);
    CHECK(m["corridor_violation_rate"].get<double>() >= 0.0);
    CHECK(m["corridor_violation_rate"].get<double>() <= 1.0);
    CHECK(m["loss_trace_path"] == "loss_trace.csv");

    // 3 classes x 4 held-out samples, one row each plus the header
    auto preds = slurp(dir / "predictions.csv");
    CHECK(std::count(preds.begin(), preds.end(), '\n') == 13);
    CHECK(preds.rfind("id,true,predicted,t_star,stop_reason,score_0,score_1,score_2",
                      0) == 0);

    auto trajs = slurp(dir / "trajectories.csv");
    CHECK(trajs.rfind("traj,label,step,t,c0,c1,c2,c3,c4,c5,c6", 0) == 0);

    // cross-file consistency: every trace row decomposes exactly
    auto trace = read_loss_trace_csv((dir / "loss_trace.csv").string());
    const double lambda = m["lambda"].get<double>();
    REQUIRE(trace.total.size() == cfg.flow.epochs);
    for (std::size_t i = 0; i < trace.total.size(); ++i)
        CHECK(trace.total[i] == trace.step_loss[i] + lambda * trace.icd_loss[i]);
    CHECK(m["final_total_loss"].get<double>() == trace.total.back());

    fs::remove_all(dir);
}

TEST_CASE("identical runs produce byte-identical metrics") {
    auto dir1 = temp_dir("hfm_exp_det1");
    auto dir2 = temp_dir("hfm_exp_det2");
    auto cfg1 = tiny_config(dir1.string());
    auto cfg2 = tiny_config(dir2.string());
    run_experiment(cfg1);
    run_experiment(cfg2);
    auto a = slurp(dir1 / "metrics.json");
    auto b = slurp(dir2 / "metrics.json");
    CHECK(!a.empty());
    CHECK(a == b);
    CHECK(slurp(dir1 / "trajectories.svg") == slurp(dir2 / "trajectories.svg"));
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("baseline_only emits no hyperbolic artifacts") {
    auto dir = temp_dir("hfm_exp_bonly");
    auto cfg = tiny_config(dir.string());
    cfg.baseline_only = true;
    auto res = run_experiment(cfg);
    CHECK_FALSE(fs::exists(dir / "loss_trace.csv"));
    CHECK_FALSE(fs::exists(dir / "velocity_net.hfmp"));
    CHECK_FALSE(fs::exists(dir / "predictions.csv"));
    CHECK(fs::exists(dir / "baseline_loss_trace.csv"));
    auto m = load_metrics(dir);
    CHECK_FALSE(m.contains("accuracy"));
    CHECK(m.contains("baseline_accuracy"));
    CHECK(res.baseline_accuracy >= 0.0);
    fs::remove_all(dir);
}

TEST_CASE("the baseline can be switched off") {
    auto dir = temp_dir("hfm_exp_nobase");
    auto cfg = tiny_config(dir.string());
    cfg.run_baseline = false;
    run_experiment(cfg);
    CHECK(fs::exists(dir / "loss_trace.csv"));
    CHECK_FALSE(fs::exists(dir / "baseline_loss_trace.csv"));
    auto m = load_metrics(dir);
    CHECK(m.contains("accuracy"));
    CHECK_FALSE(m.contains("baseline_accuracy"));
    fs::remove_all(dir);

    auto bad = tiny_config(dir.string());
    bad.run_baseline = false;
    bad.baseline_only = true;
    CHECK_THROWS_AS(run_experiment(bad), std::invalid_argument);
}

TEST_CASE("run_experiment ingests a written dataset") {
    auto dir = temp_dir("hfm_exp_ingest");
    fs::create_directories(dir);
    SyntheticConfig scfg;
    scfg.n_classes = 3;
    scfg.dim = 6;
    scfg.samples_per_class = 5;
    scfg.seed = 9;
    auto ds = generate_synthetic(scfg);
    auto data_path = dir / "data.hfmf";
    write_feature_file(data_path.string(), ds);

    auto cfg = tiny_config((dir / "run").string());
    cfg.input_path = data_path.string();
    cfg.synth.n_classes = 99; // must be ignored when ingesting
    auto res = run_experiment(cfg);
    auto m = load_metrics(dir / "run");
    CHECK(m["n_classes"].get<int>() == 3);
    CHECK(res.accuracy >= 0.0);
    fs::remove_all(dir);
}

TEST_CASE("failing stages are named on stderr") {
    auto dir = temp_dir("hfm_exp_fail");
    auto cfg = tiny_config(dir.string());
    cfg.flow.lr = 1e12; // diverges immediately
    CerrCapture cap;
    CHECK_THROWS_AS(run_experiment(cfg), TrainingFailure);
    CHECK(cap.text().find("flow-train") != std::string::npos);
    fs::remove_all(dir);
}
