// lbt - command line front end for the beam tracking library.
//
// Talks to the shared library exclusively through the C interface in
// liquidbeam.h. Subcommands: gen-data, train, eval, sweep, gradcheck,
// selftest.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liquidbeam.h"

namespace {

void print_log_line(const char* line, void*) { std::printf("%s\n", line); }

struct ConfigDeleter {
    void operator()(lbt_config* cfg) const { lbt_config_free(cfg); }
};
using ConfigPtr = std::unique_ptr<lbt_config, ConfigDeleter>;

int report_failure(const char* what, lbt_status status) {
    std::fprintf(stderr, "lbt: %s failed (status %d): %s\n", what, static_cast<int>(status),
                 lbt_last_error());
    return 1;
}

// Shared --preset/--config/--set handling; applied in that order so that
// explicit overrides win.
struct CommonOpts {
    std::string preset;
    std::string config_file;
    std::vector<std::string> sets;

    void attach(CLI::App* app) {
        app->add_option("--preset", preset, "parameter preset: paper | desk | tiny | overfit");
        app->add_option("--config", config_file, "key = value config file");
        app->add_option("--set", sets, "override a config key, e.g. --set train.epochs=10")
            ->take_all();
    }

    int apply(lbt_config* cfg) const {
        if (!preset.empty()) {
            if (lbt_config_preset(cfg, preset.c_str()) != LBT_OK)
                return report_failure("preset", LBT_ERR_CONFIG);
        }
        if (!config_file.empty()) {
            const lbt_status st = lbt_config_load(cfg, config_file.c_str());
            if (st != LBT_OK) return report_failure("config load", st);
        }
        for (const std::string& kv : sets) {
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "lbt: --set expects key=value, got '%s'\n", kv.c_str());
                return 1;
            }
            const std::string key = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            const lbt_status st = lbt_config_set(cfg, key.c_str(), value.c_str());
            if (st != LBT_OK) return report_failure("config set", st);
        }
        return 0;
    }
};

std::string derive_val_path(const std::string& train_path) {
    const std::size_t dot = train_path.rfind('.');
    const std::size_t slash = train_path.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return train_path + ".val";
    return train_path.substr(0, dot) + ".val" + train_path.substr(dot);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-time mmWave beam tracking harness"};
    app.require_subcommand(1);
    lbt_set_logger(print_log_line, nullptr);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate train/validation episode files");
    CommonOpts gen_opts;
    gen_opts.attach(gen);
    std::string gen_out = "train.bin";
    std::string gen_val_out;
    std::string gen_seed;
    gen->add_option("--out", gen_out, "train dataset path (val path derived unless --out-val)");
    gen->add_option("--out-val", gen_val_out, "validation dataset path");
    gen->add_option("--seed", gen_seed, "dataset master seed");

    // train
    auto* tr = app.add_subcommand("train", "train a tracker model");
    CommonOpts tr_opts;
    tr_opts.attach(tr);
    std::string tr_model, tr_data, tr_val, tr_outdir, tr_seed;
    tr->add_option("--model", tr_model, "lnn | lstm | ode-lstm");
    tr->add_option("--data", tr_data, "train dataset path");
    tr->add_option("--val", tr_val, "validation dataset path");
    tr->add_option("--out-dir", tr_outdir, "output directory");
    tr->add_option("--seed", tr_seed, "training seed");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_csv;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset path")->required();
    ev->add_option("--out", ev_csv, "per-slot/per-instant CSV output path");

    // sweep
    auto* sw = app.add_subcommand("sweep", "run a figure-style sweep to CSV");
    CommonOpts sw_opts;
    sw_opts.attach(sw);
    std::string sw_axis, sw_out = "sweep.csv";
    std::string sw_lnn, sw_lstm, sw_ode, sw_val;
    sw->add_option("--axis", sw_axis,
                   "training_instant | prediction_instant | noise_factor")
        ->required();
    sw->add_option("--out", sw_out, "CSV output path");
    sw->add_option("--ckpt-lnn", sw_lnn, "trained lnn checkpoint");
    sw->add_option("--ckpt-lstm", sw_lstm, "trained lstm checkpoint");
    sw->add_option("--ckpt-ode-lstm", sw_ode, "trained ode-lstm checkpoint");
    sw->add_option("--val", sw_val, "validation dataset path");

    // verification suites
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    auto* st = app.add_subcommand("selftest", "property invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    ConfigPtr cfg;
    {
        lbt_config* raw = nullptr;
        if (lbt_config_create(&raw) != LBT_OK) return report_failure("config", LBT_ERR_INTERNAL);
        cfg.reset(raw);
    }

    if (gen->parsed()) {
        if (int rc = gen_opts.apply(cfg.get())) return rc;
        if (!gen_seed.empty() &&
            lbt_config_set(cfg.get(), "data.seed", gen_seed.c_str()) != LBT_OK)
            return report_failure("config set", LBT_ERR_PARSE);
        const std::string val_path = gen_val_out.empty() ? derive_val_path(gen_out) : gen_val_out;
        const lbt_status status = lbt_gen_data(cfg.get(), gen_out.c_str(), val_path.c_str());
        if (status != LBT_OK) return report_failure("gen-data", status);
        return 0;
    }

    if (tr->parsed()) {
        if (int rc = tr_opts.apply(cfg.get())) return rc;
        auto maybe_set = [&cfg](const char* key, const std::string& value) -> int {
            if (value.empty()) return 0;
            const lbt_status st = lbt_config_set(cfg.get(), key, value.c_str());
            return st == LBT_OK ? 0 : report_failure("config set", st);
        };
        if (maybe_set("model.kind", tr_model)) return 1;
        if (maybe_set("data.train", tr_data)) return 1;
        if (maybe_set("data.val", tr_val)) return 1;
        if (maybe_set("train.out_dir", tr_outdir)) return 1;
        if (maybe_set("train.seed", tr_seed)) return 1;
        char ckpt[4096];
        const lbt_status status = lbt_train(cfg.get(), ckpt, sizeof(ckpt));
        if (status != LBT_OK) return report_failure("train", status);
        std::printf("checkpoint: %s\n", ckpt);
        return 0;
    }

    if (ev->parsed()) {
        double mean = 0.0;
        const lbt_status status = lbt_evaluate(ev_ckpt.c_str(), ev_data.c_str(),
                                               ev_csv.empty() ? nullptr : ev_csv.c_str(), &mean);
        if (status != LBT_OK) return report_failure("eval", status);
        std::printf("mean normalized spectral efficiency: %.6g\n", mean);
        return 0;
    }

    if (sw->parsed()) {
        if (int rc = sw_opts.apply(cfg.get())) return rc;
        auto maybe_set = [&cfg](const char* key, const std::string& value) -> int {
            if (value.empty()) return 0;
            const lbt_status st = lbt_config_set(cfg.get(), key, value.c_str());
            return st == LBT_OK ? 0 : report_failure("config set", st);
        };
        if (maybe_set("sweep.ckpt_lnn", sw_lnn)) return 1;
        if (maybe_set("sweep.ckpt_lstm", sw_lstm)) return 1;
        if (maybe_set("sweep.ckpt_ode_lstm", sw_ode)) return 1;
        if (maybe_set("data.val", sw_val)) return 1;
        const lbt_status status = lbt_sweep(cfg.get(), sw_axis.c_str(), sw_out.c_str());
        if (status != LBT_OK) return report_failure("sweep", status);
        return 0;
    }

    if (gc->parsed()) {
        double worst = 0.0;
        const lbt_status status = lbt_gradcheck(&worst);
        std::printf("gradcheck worst relative error: %.6g\n", worst);
        if (status != LBT_OK) return report_failure("gradcheck", status);
        std::printf("gradcheck: all checks passed\n");
        return 0;
    }

    if (st->parsed()) {
        const lbt_status status = lbt_selftest();
        if (status != LBT_OK) return report_failure("selftest", status);
        std::printf("selftest: all checks passed\n");
        return 0;
    }

    return 2;
}
