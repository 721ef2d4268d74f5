#include "liquidbeam.h"

#include <algorithm>
#include <cstring>
#include <string>

#include "liquidbeam/harness.hpp"

namespace {

thread_local std::string t_last_error = "";

lbt_status fail(lbt_status code, const std::string& message) {
    t_last_error = message;
    return code;
}

// Maps the library's exception taxonomy onto status codes.
template <class Fn>
lbt_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const lbt::parse_error& e) {
        return fail(LBT_ERR_PARSE, e.what());
    } catch (const lbt::config_error& e) {
        return fail(LBT_ERR_CONFIG, e.what());
    } catch (const lbt::io_error& e) {
        return fail(LBT_ERR_IO, e.what());
    } catch (const lbt::format_error& e) {
        return fail(LBT_ERR_FORMAT, e.what());
    } catch (const lbt::data_error& e) {
        return fail(LBT_ERR_DATA, e.what());
    } catch (const lbt::state_error& e) {
        return fail(LBT_ERR_STATE, e.what());
    } catch (const lbt::dim_error& e) {
        return fail(LBT_ERR_INVALID, e.what());
    } catch (const lbt::geometry_error& e) {
        return fail(LBT_ERR_INVALID, e.what());
    } catch (const lbt::numeric_error& e) {
        return fail(LBT_ERR_INVALID, e.what());
    } catch (const std::domain_error& e) {
        return fail(LBT_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return fail(LBT_ERR_INTERNAL, e.what());
    }
}

}  // namespace

struct lbt_config {
    lbt::RunConfig cfg;
};

extern "C" {

const char* lbt_version(void) { return "1.0.0"; }

const char* lbt_last_error(void) { return t_last_error.c_str(); }

void lbt_set_logger(lbt_log_fn fn, void* user) {
    if (fn == nullptr) {
        lbt::set_log_sink(nullptr);
    } else {
        lbt::set_log_sink([fn, user](const std::string& line) { fn(line.c_str(), user); });
    }
}

lbt_status lbt_config_create(lbt_config** out) {
    if (out == nullptr) return fail(LBT_ERR_INVALID, "lbt_config_create: out is NULL");
    return guarded([&]() {
        *out = new lbt_config{lbt::default_config()};
        return LBT_OK;
    });
}

void lbt_config_free(lbt_config* cfg) { delete cfg; }

lbt_status lbt_config_preset(lbt_config* cfg, const char* name) {
    if (cfg == nullptr || name == nullptr)
        return fail(LBT_ERR_INVALID, "lbt_config_preset: NULL argument");
    return guarded([&]() {
        lbt::apply_preset(cfg->cfg, name);
        return LBT_OK;
    });
}

lbt_status lbt_config_load(lbt_config* cfg, const char* path) {
    if (cfg == nullptr || path == nullptr)
        return fail(LBT_ERR_INVALID, "lbt_config_load: NULL argument");
    return guarded([&]() {
        lbt::load_config_file(cfg->cfg, path);
        return LBT_OK;
    });
}

lbt_status lbt_config_set(lbt_config* cfg, const char* key, const char* value) {
    if (cfg == nullptr || key == nullptr || value == nullptr)
        return fail(LBT_ERR_INVALID, "lbt_config_set: NULL argument");
    return guarded([&]() {
        lbt::set_config_key(cfg->cfg, key, value);
        return LBT_OK;
    });
}

lbt_status lbt_config_dump(const lbt_config* cfg, char* buf, size_t cap, size_t* needed) {
    if (cfg == nullptr) return fail(LBT_ERR_INVALID, "lbt_config_dump: cfg is NULL");
    return guarded([&]() {
        const std::string text = lbt::dump_config(cfg->cfg);
        if (needed != nullptr) *needed = text.size() + 1;
        if (buf != nullptr && cap > 0) {
            const size_t n = std::min(cap - 1, text.size());
            std::memcpy(buf, text.data(), n);
            buf[n] = '\0';
        }
        return LBT_OK;
    });
}

lbt_status lbt_gen_data(const lbt_config* cfg, const char* train_path, const char* val_path) {
    if (cfg == nullptr || train_path == nullptr || val_path == nullptr)
        return fail(LBT_ERR_INVALID, "lbt_gen_data: NULL argument");
    return guarded([&]() {
        lbt::generate_data_files(cfg->cfg, train_path, val_path);
        return LBT_OK;
    });
}

lbt_status lbt_train(const lbt_config* cfg, char* ckpt_path_buf, size_t cap) {
    if (cfg == nullptr) return fail(LBT_ERR_INVALID, "lbt_train: cfg is NULL");
    return guarded([&]() {
        const lbt::TrainResult result = lbt::train(cfg->cfg);
        if (ckpt_path_buf != nullptr && cap > 0) {
            const size_t n = std::min(cap - 1, result.checkpoint_path.size());
            std::memcpy(ckpt_path_buf, result.checkpoint_path.data(), n);
            ckpt_path_buf[n] = '\0';
        }
        return LBT_OK;
    });
}

lbt_status lbt_evaluate(const char* ckpt_path, const char* dataset_path, const char* out_csv,
                        double* mean_sen) {
    if (ckpt_path == nullptr || dataset_path == nullptr)
        return fail(LBT_ERR_INVALID, "lbt_evaluate: NULL argument");
    return guarded([&]() {
        const lbt::EvalReport report = lbt::evaluate_checkpoint(ckpt_path, dataset_path);
        if (out_csv != nullptr) lbt::write_eval_csv(out_csv, report);
        if (mean_sen != nullptr) *mean_sen = report.overall;
        return LBT_OK;
    });
}

lbt_status lbt_sweep(const lbt_config* cfg, const char* axis, const char* out_csv) {
    if (cfg == nullptr || axis == nullptr || out_csv == nullptr)
        return fail(LBT_ERR_INVALID, "lbt_sweep: NULL argument");
    return guarded([&]() {
        lbt::sweep(cfg->cfg, axis, out_csv);
        return LBT_OK;
    });
}

lbt_status lbt_gradcheck(double* max_rel_err) {
    return guarded([&]() {
        const auto entries = lbt::gradient_suite();
        double worst = 0.0;
        bool all_pass = true;
        std::string first_fail;
        for (const auto& e : entries) {
            worst = std::max(worst, e.value);
            if (!e.pass && all_pass) {
                all_pass = false;
                first_fail = e.name;
            }
        }
        if (max_rel_err != nullptr) *max_rel_err = worst;
        if (!all_pass)
            return fail(LBT_ERR_CHECK, "gradient check failed at op '" + first_fail + "'");
        return LBT_OK;
    });
}

lbt_status lbt_selftest(void) {
    return guarded([&]() {
        const auto entries = lbt::selftest_suite();
        for (const auto& e : entries)
            if (!e.pass) return fail(LBT_ERR_CHECK, "self-test failed at '" + e.name + "'");
        return LBT_OK;
    });
}

}  // extern "C"
