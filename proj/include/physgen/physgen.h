#ifndef PHYSGEN_PHYSGEN_H
#define PHYSGEN_PHYSGEN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PG_API __declspec(dllexport)
#else
#define PG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pg_status {
  PG_OK = 0,
  PG_ERR_INVALID_ARGUMENT = 1,
  PG_ERR_IO = 2,
  PG_ERR_CHECKSUM = 3,
  PG_ERR_VERSION = 4,
  PG_ERR_SOLVER = 5,
  PG_ERR_DIVERGED = 6,
  PG_ERR_UNSUPPORTED = 7,
  PG_ERR_INTERNAL = 8
} pg_status;

/* Message of the last failed call on this thread; empty after a success. */
PG_API const char* pg_last_error(void);
PG_API const char* pg_status_name(pg_status status);
PG_API const char* pg_version(void);

typedef struct pg_dataset pg_dataset;
typedef struct pg_model pg_model;

/* ---- datasets ---- */

typedef struct pg_darcy_params {
  int count;
  int n;
  int s;
  double length_scale;
  double mean_log_k;
  double source_rate;
  double source_width;
  uint64_t seed;
} pg_darcy_params;

typedef struct pg_burgers_params {
  int count;
  int nx;
  int nt;
  double dt;
  double nu;
  double length;
  int modes;
  int max_wavenumber;
  uint64_t seed;
} pg_burgers_params;

PG_API void pg_darcy_params_default(pg_darcy_params* out);
PG_API void pg_burgers_params_default(pg_burgers_params* out);

PG_API pg_status pg_generate_darcy(const pg_darcy_params* params, pg_dataset** out);
PG_API pg_status pg_generate_burgers(const pg_burgers_params* params, pg_dataset** out);
PG_API pg_status pg_dataset_load(const char* dir, pg_dataset** out);
PG_API pg_status pg_dataset_save(const pg_dataset* ds, const char* dir);
PG_API void pg_dataset_free(pg_dataset* ds);

PG_API int pg_dataset_count(const pg_dataset* ds);
PG_API size_t pg_dataset_dim(const pg_dataset* ds);
/* "darcy" or "burgers". */
PG_API const char* pg_dataset_kind(const pg_dataset* ds);
/* Copies sample `index` (channels concatenated, row-major) into `out` of length dim. */
PG_API pg_status pg_dataset_sample(const pg_dataset* ds, int index, double* out, size_t len);
/* Writes channel `channel` of sample `index` as a 16-bit PGM image. */
PG_API pg_status pg_dataset_emit_image(const pg_dataset* ds, int index, int channel, const char* path);

/* ---- models ---- */

typedef enum pg_condition { PG_CONDITION_NONE = 0, PG_CONDITION_THETA = 1, PG_CONDITION_MEASUREMENTS = 2 } pg_condition;

typedef struct pg_train_params {
  int width;
  int hidden_layers;
  int time_frequencies;
  double learning_rate;
  int batch_size;
  int epochs;
  double t_min;
  uint64_t seed;
  pg_condition condition;
  /* Directions in the Gaussian-moment prior; 0 trains the bare network. */
  int prior_rank;
} pg_train_params;

PG_API void pg_train_params_default(pg_train_params* out);

/* `base` is required for conditional training and ignored otherwise. `final_loss`
   (nullable) receives the mean loss over the last epoch. */
PG_API pg_status pg_train(const pg_dataset* ds, const pg_train_params* params, const pg_model* base, pg_model** out,
                          double* final_loss);
PG_API pg_status pg_model_save(const pg_model* model, const char* path);
PG_API pg_status pg_model_load(const char* path, pg_model** out);
PG_API void pg_model_free(pg_model* model);
/* Hex SHA-256 of the base parameters, written into `out` (at least 65 bytes). */
PG_API pg_status pg_model_base_hash(const pg_model* model, char* out, size_t len);

/* ---- sampling ---- */

typedef enum pg_equation { PG_EQUATION_REVERSE_SDE = 0, PG_EQUATION_PF_ODE = 1 } pg_equation;
typedef enum pg_eps_rule { PG_EPS_PAPER = 0, PG_EPS_NORMALIZED = 1, PG_EPS_FIXED = 2 } pg_eps_rule;

typedef struct pg_sample_params {
  pg_equation equation;
  int tau;
  int N;
  int M;
  pg_eps_rule eps_rule;
  double eps;
  uint64_t seed;
  int count;
  double gamma;
  int m;
  uint64_t measurement_seed;
} pg_sample_params;

typedef struct pg_counters {
  long score_evals;
  long residual_evals;
  double wall_time;
} pg_counters;

PG_API void pg_sample_params_default(pg_sample_params* out);

/* `conditions` supplies per-chain conditions for conditional models (nullable otherwise). */
PG_API pg_status pg_sample(const pg_model* model, const pg_dataset* reference, const pg_dataset* conditions,
                           const pg_sample_params* params, pg_dataset** out, pg_counters* counters);

/* Reconstructs the first params->count targets from params->m measurements each,
   with `repaint_r` resampling pairs per step. */
PG_API pg_status pg_impute(const pg_model* model, const pg_dataset* reference, const pg_dataset* targets,
                           const pg_sample_params* params, int repaint_r, pg_dataset** out, pg_counters* counters);

PG_API pg_status pg_pod(const pg_dataset* reference, const pg_dataset* targets, int rank, int m, int cases,
                        uint64_t measurement_seed, pg_dataset** out);

/* ---- metrics ---- */

typedef struct pg_metrics {
  char equation[16];
  int tau, N, M, m, r;
  double mean_residual;
  double excess_residual;
  double pressure_error;
  double permeability_error;
  double rmse;
  int has_pressure_error;
  int has_permeability_error;
  int has_rmse;
  long score_evals;
  long residual_evals;
  double wall_time;
} pg_metrics;

PG_API pg_status pg_eval(const pg_dataset* samples, const pg_dataset* reference, const pg_dataset* targets,
                         pg_metrics* out);
/* Appends one row to an RFC-4180 CSV file, writing the header if the file is new. */
PG_API pg_status pg_metrics_append_csv(const pg_metrics* row, const char* run_id, const char* path);

#ifdef __cplusplus
}
#endif

#endif
