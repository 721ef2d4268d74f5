/* liquidbeam.h - C interface to the beam tracking library.
 *
 * All functionality is reachable through an opaque configuration handle and
 * a handful of coarse operations (data generation, training, evaluation,
 * sweeps, verification suites). Every call returns a status code; the
 * descriptive message for the most recent failure on the calling thread is
 * available from lbt_last_error().
 */
#ifndef LIQUIDBEAM_H
#define LIQUIDBEAM_H

#include <stddef.h>

#if defined(_WIN32)
#define LBT_API __declspec(dllexport)
#else
#define LBT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lbt_status {
    LBT_OK = 0,
    LBT_ERR_INVALID = 1,  /* bad argument, dimension or domain error */
    LBT_ERR_CONFIG = 2,   /* inconsistent configuration */
    LBT_ERR_PARSE = 3,    /* config text could not be parsed */
    LBT_ERR_IO = 4,       /* file missing, unreadable or truncated */
    LBT_ERR_FORMAT = 5,   /* bad magic/version/layout in a binary file */
    LBT_ERR_DATA = 6,     /* dataset or label inconsistency */
    LBT_ERR_STATE = 7,    /* operation out of sequence */
    LBT_ERR_CHECK = 8,    /* a verification suite reported failures */
    LBT_ERR_INTERNAL = 9
} lbt_status;

typedef struct lbt_config lbt_config;

LBT_API const char* lbt_version(void);

/* Message for the last failing call on this thread; never NULL. */
LBT_API const char* lbt_last_error(void);

/* Line-oriented progress output (training epochs, sweep progress). Pass
 * fn = NULL to silence. */
typedef void (*lbt_log_fn)(const char* line, void* user);
LBT_API void lbt_set_logger(lbt_log_fn fn, void* user);

/* --- configuration ------------------------------------------------------ */

LBT_API lbt_status lbt_config_create(lbt_config** out);
LBT_API void lbt_config_free(lbt_config* cfg);

/* "paper" | "desk" | "tiny" | "overfit" */
LBT_API lbt_status lbt_config_preset(lbt_config* cfg, const char* name);

/* "key = value" text file; later calls override earlier values. */
LBT_API lbt_status lbt_config_load(lbt_config* cfg, const char* path);

LBT_API lbt_status lbt_config_set(lbt_config* cfg, const char* key, const char* value);

/* Canonical "key = value" dump. Writes at most cap bytes including the NUL
 * terminator; *needed receives the full length regardless. */
LBT_API lbt_status lbt_config_dump(const lbt_config* cfg, char* buf, size_t cap, size_t* needed);

/* --- operations --------------------------------------------------------- */

/* Generates the train/validation episode files configured by cfg. */
LBT_API lbt_status lbt_gen_data(const lbt_config* cfg, const char* train_path,
                                const char* val_path);

/* Trains the configured model; writes checkpoint.bin / loss.csv / config.txt
 * under train.out_dir. When ckpt_path_buf is non-NULL the checkpoint path is
 * copied into it (truncated to cap, always NUL-terminated). */
LBT_API lbt_status lbt_train(const lbt_config* cfg, char* ckpt_path_buf, size_t cap);

/* Evaluates a checkpoint on a dataset. out_csv may be NULL (no file written);
 * mean_sen may be NULL. */
LBT_API lbt_status lbt_evaluate(const char* ckpt_path, const char* dataset_path,
                                const char* out_csv, double* mean_sen);

/* axis: "training_instant" | "prediction_instant" | "noise_factor". */
LBT_API lbt_status lbt_sweep(const lbt_config* cfg, const char* axis, const char* out_csv);

/* Finite-difference gradient verification over every differentiable op and
 * all model variants. Returns LBT_OK only if every check passes;
 * max_rel_err (optional) receives the worst relative error seen. */
LBT_API lbt_status lbt_gradcheck(double* max_rel_err);

/* Property invariants (codebook structure, beam-search oracles, cell
 * behavior, determinism). Returns LBT_OK only if every check passes. */
LBT_API lbt_status lbt_selftest(void);

#ifdef __cplusplus
}
#endif

#endif /* LIQUIDBEAM_H */
