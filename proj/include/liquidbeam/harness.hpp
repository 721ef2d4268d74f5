#pragma once

// Experiment orchestration: run configuration (file + key overrides),
// dataset generation entry points, the training loop, normalized spectral
// efficiency evaluation with its per-slot / per-instant marginals, the three
// CSV sweeps, and the gradient-check / property self-test suites behind the
// gradcheck and selftest subcommands.

#include <functional>
#include <string>
#include <vector>

#include "liquidbeam/dataset.hpp"
#include "liquidbeam/models.hpp"

namespace lbt {

struct RunConfig {
    SceneConfig scene;  // scene.seed doubles as the dataset master seed
    ModelKind kind = ModelKind::lnn;
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 3e-5;
    std::vector<double> tbar_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::uint64_t train_seed = 1;
    int n_train = 10240;
    int n_val = 2560;
    int data_threads = 1;
    std::string train_path = "train.bin";
    std::string val_path = "val.bin";
    std::string out_dir = "out";

    // noise_factor sweep settings
    std::vector<double> noise_factors = {7.0, 9.0, 11.0, 13.0};
    bool sweep_retrain = true;
    std::string ckpt_lnn;
    std::string ckpt_lstm;
    std::string ckpt_ode_lstm;

    void validate() const;
};

RunConfig default_config();

// Named parameter bundles: "paper" (the full-scale defaults), "desk"
// (16 beams, 5 slots, minutes on a CPU), "tiny" (seconds; for tests),
// "overfit" (single episode memorization).
void apply_preset(RunConfig& cfg, const std::string& name);

// Text config, one "key = value" per line, '#' comments. Unknown keys list
// the valid ones; type errors name the offending line.
void load_config_file(RunConfig& cfg, const std::string& path);
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::string dump_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Progress lines ("epoch 3/30 loss 2.01") go through this sink; silent by
// default so library users opt in.
void set_log_sink(std::function<void(const std::string&)> sink);
void log_line(const std::string& line);

// Dataset generation driven by the config (scene, counts, instant grid,
// scene.seed, data_threads); writes both splits.
void generate_data_files(const RunConfig& cfg, const std::string& train_path,
                         const std::string& val_path);

struct TrainResult {
    std::string checkpoint_path;
    std::string loss_csv_path;
    std::vector<double> epoch_loss;  // mean cross entropy per prediction instant
};

// Epoch loop over shuffled episodes with the configured batch size. Writes
// out_dir/checkpoint.bin (refreshed every epoch), out_dir/loss.csv and
// out_dir/config.txt. Single-threaded and bit-deterministic for a fixed seed.
TrainResult train(const RunConfig& cfg);

struct EvalReport {
    std::vector<double> tbar_grid;
    int n_slots = 0;
    std::vector<std::vector<double>> mean_sen;  // [slot][instant]
    std::vector<double> by_slot;                // mean over instants
    std::vector<double> by_tbar;                // mean over slots
    double overall = 0.0;
};

// predictions[episode][slot][instant] = chosen beam index.
using PredictionTable = std::vector<std::vector<std::vector<int>>>;

PredictionTable predict_all(TrackerModelF& model, const Dataset& ds, int batch_size = 64);

// Normalized spectral efficiency of arbitrary predictions against the stored
// channels; the optimum is recomputed from the stored snapshot so every entry
// lands in [0, 1] by construction.
EvalReport score_predictions(const Dataset& ds, const PredictionTable& predictions);

EvalReport evaluate(TrackerModelF& model, const Dataset& ds, int batch_size = 64);
EvalReport evaluate_checkpoint(const std::string& ckpt_path, const std::string& dataset_path);

void write_eval_csv(const std::string& path, const EvalReport& report);

// One CSV per figure-style sweep. Axes: "training_instant" (per-slot means),
// "prediction_instant" (per-instant means), "noise_factor" (overall mean per
// noise figure; retrains per point unless cfg.sweep_retrain is false, in
// which case the configured checkpoints are re-evaluated).
void sweep(const RunConfig& cfg, const std::string& axis, const std::string& out_csv);

struct CheckEntry {
    std::string name;
    double value = 0.0;      // max relative error (gradcheck) or measured stat
    double threshold = 0.0;  // pass iff value <= threshold (when used)
    bool pass = false;
};

// Finite-difference suite over every differentiable op and all three full
// models at double precision.
std::vector<CheckEntry> gradient_suite();

// Property invariants: codebook structure, channel oracles, cell behavior,
// reference ODE consistency, prefix causality, probability normalization.
std::vector<CheckEntry> selftest_suite();

// Codeword whose spatial frequency is closest (mod 2pi) to that of a path at
// azimuth theta; the geometric oracle the exhaustive search is checked
// against.
int nearest_codeword_index(double theta, int n_beams);

// Spearman rank correlation; used for trend checks on sweep outputs.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

std::string format_float(double v);  // 6 significant digits, CSV convention

}  // namespace lbt
