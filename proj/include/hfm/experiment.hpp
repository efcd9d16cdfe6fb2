#pragma once

#include <cstdint>
#include <string>

#include "hfm/alignment.hpp"
#include "hfm/dataset.hpp"
#include "hfm/diagnostics.hpp"
#include "hfm/flow_train.hpp"

namespace hfm {

// Everything one run needs; a run is reproducible from this object alone.
// The master seed fans out per stage so stages stay decoupled: dataset
// generation uses seed, the k-shot split seed+1, alignment seed+2, both
// trainers seed+3, and the 2D projection seed+4.
struct ExperimentConfig {
    SyntheticConfig synth;
    std::string input_path; // non-empty: ingest this file (.csv or binary)
                            // instead of generating synthetic data
    std::size_t shots = 4;
    AlignmentConfig align;
    FlowTrainConfig flow;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool run_baseline = true;
    bool baseline_only = false;

    // Benchmark recipe. The library defaults for alignment and flow training
    // are general-purpose; the workbench run overrides them with settings
    // calibrated on the reference task (8 clusters, 16 dims, 4-shot): a
    // gentler alignment schedule that does not overfit 32 support points,
    // a longer flow schedule at a slightly higher step size, and cluster
    // spread 0.24 so class shells touch without swallowing each other.
    ExperimentConfig() {
        synth.overlap = 1.0;
        synth.sigma = 0.24;
        align.lr = 0.001;
        align.epochs = 200;
        flow.epochs = 1000;
        flow.lr = 4e-4;
    }
};

// One key=value assignment; unknown keys and unparsable values throw
// std::invalid_argument. The key list is documented in the README.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

// Flat key=value file: one assignment per line, '#' comments, blank lines
// ignored. Starts from the defaults above.
ExperimentConfig parse_experiment_config(const std::string& path);

struct ExperimentResult {
    double nearest_prototype_accuracy = 0.0;

    // hyperbolic transport pipeline (absent under baseline_only)
    double accuracy = 0.0;
    double mean_t_star = 0.0;
    double threshold_hit_rate = 0.0;
    double d_txt = 0.0;
    double threshold = 0.0;
    EntanglementReport report;

    // Euclidean control (absent when run_baseline is off)
    double baseline_accuracy = 0.0;
    double baseline_mean_t_star = 0.0;
    double baseline_threshold_hit_rate = 0.0;
    double baseline_threshold = 0.0;
    EntanglementReport baseline_report;

    std::string metrics_path;
};

// Runs data -> split -> alignment -> flow training -> transport inference ->
// diagnostics, plus the matched Euclidean baseline, and writes all
// artifacts into cfg.out_dir: metrics.json, loss_trace.csv,
// predictions.csv, trajectories.csv, velocity_net.hfmp, their baseline_*
// twins, and trajectories.svg. Paths inside metrics.json are relative, so
// two runs of the same config produce byte-identical JSON. On failure the
// stage name goes to stderr and the exception propagates.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

} // namespace hfm
