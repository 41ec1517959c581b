#ifndef M2I2_M2I2_H
#define M2I2_M2I2_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define M2I2_API __declspec(dllexport)
#else
#define M2I2_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum m2i2_status {
  M2I2_OK = 0,
  M2I2_ERR_INVALID_ARGUMENT = 1,
  M2I2_ERR_INVALID_CONFIG = 2,
  M2I2_ERR_IO = 3,
  M2I2_ERR_NON_FINITE = 4,
  M2I2_ERR_STATE = 5,
  M2I2_ERR_SHAPE = 6,
  M2I2_ERR_BUFFER_TOO_SMALL = 7,
  M2I2_ERR_INTERNAL = 99
} m2i2_status;

M2I2_API const char* m2i2_version(void);
M2I2_API const char* m2i2_status_string(m2i2_status status);
/* Message of the last failed call on this thread; "" after a success. */
M2I2_API const char* m2i2_last_error(void);

/*
 * String outputs: *len receives the length without the terminator. When buf
 * is NULL or cap <= *len nothing is written and M2I2_ERR_BUFFER_TOO_SMALL is
 * returned, so a NULL/0 call queries the size.
 */

/* ---- run configuration (flat dotted keys, e.g. learner.beta) ---- */

typedef struct m2i2_config m2i2_config;

M2I2_API m2i2_status m2i2_config_create(m2i2_config** out);
M2I2_API m2i2_status m2i2_config_load(const char* path, m2i2_config** out);
M2I2_API m2i2_status m2i2_config_clone(const m2i2_config* config, m2i2_config** out);
M2I2_API void m2i2_config_destroy(m2i2_config* config);
M2I2_API m2i2_status m2i2_config_set(m2i2_config* config, const char* key, const char* value);
/* "key=value" */
M2I2_API m2i2_status m2i2_config_assign(m2i2_config* config, const char* assignment);
M2I2_API m2i2_status m2i2_config_get(const m2i2_config* config, const char* key, char* buf, size_t cap, size_t* len);
/* Every key, one "key = value" line each. */
M2I2_API m2i2_status m2i2_config_format(const m2i2_config* config, char* buf, size_t cap, size_t* len);
/* Checks ranges and variant consistency. */
M2I2_API m2i2_status m2i2_config_validate(const m2i2_config* config);
/* Output directory of the run: run.output_dir, else $M2I2_OUTPUT_ROOT/run.name. */
M2I2_API m2i2_status m2i2_config_run_dir(const m2i2_config* config, char* buf, size_t cap, size_t* len);

/* ---- training ---- */

typedef struct m2i2_record {
  int64_t env_steps;
  int64_t episodes;
  int64_t updates;
  int has_win_rate; /* Hallway family */
  double test_win_rate;
  double test_mean_return;
  double test_return_stderr;
  double loss_total;
  double loss_rl;
  double loss_rc;
  double loss_inv;
  double epsilon;
  double comm_frequency;
  double wall_clock;
  double performance; /* win rate where available, mean return otherwise */
} m2i2_record;

typedef void (*m2i2_record_fn)(const m2i2_record* record, void* user);
typedef void (*m2i2_run_fn)(const char* run_dir, void* user);

typedef struct m2i2_train_options {
  int resume;         /* continue from <run dir>/checkpoint.bin */
  int reuse_existing; /* skip when a finished run with the same config exists */
  m2i2_record_fn on_record;
  void* user;
} m2i2_train_options;

typedef struct m2i2_train_result {
  m2i2_record final_record;
  uint64_t parameter_count;
  double wall_seconds;
} m2i2_train_result;

/* options may be NULL. */
M2I2_API m2i2_status m2i2_train(const m2i2_config* config, const m2i2_train_options* options,
                                m2i2_train_result* out);

/* ---- evaluation and reporting ---- */

typedef struct m2i2_eval_summary {
  int episodes;
  int has_win_rate;
  double win_rate;
  double win_rate_stderr;
  double mean_return;
  double return_stderr;
  double mean_length;
  double performance;
} m2i2_eval_summary;

/* Greedy episodes with the configuration stored in the checkpoint. */
M2I2_API m2i2_status m2i2_evaluate_checkpoint(const char* checkpoint_path, int episodes, uint64_t seed,
                                              m2i2_eval_summary* out);

/* (perf - baseline) / frequency, frequency in (0, 1]. */
M2I2_API m2i2_status m2i2_comm_efficiency(double perf, double baseline, double frequency, double* out);

/* Mean test performance over the last `window` records of a run. */
M2I2_API m2i2_status m2i2_final_performance(const char* run_dir, size_t window, double* out);

typedef struct m2i2_efficiency {
  double performance; /* median over method runs */
  double baseline;    /* median over baseline runs */
  double frequency;   /* logged by the method runs */
  double efficiency;
} m2i2_efficiency;

M2I2_API m2i2_status m2i2_efficiency_from_runs(const char* const* method_dirs, size_t n_method,
                                               const char* const* baseline_dirs, size_t n_baseline,
                                               m2i2_efficiency* out);

/* ---- ablation grid ---- */

typedef struct m2i2_ablation m2i2_ablation;

typedef struct m2i2_ablate_options {
  const char* variants; /* comma separated; NULL for the default four */
  const double* comm_rates; /* swept for the m2i2 variant; may be NULL */
  size_t n_comm_rates;
  const uint64_t* seeds; /* NULL for 1..5 */
  size_t n_seeds;
  int reuse_existing;
  m2i2_run_fn on_run_start;
  void* user;
} m2i2_ablate_options;

typedef struct m2i2_ablation_cell {
  const char* label;   /* valid while the ablation handle lives */
  const char* variant;
  double comm_rate;
  size_t runs;
  double median;
  double mean;
  double stderr_;
  double min;
  double max;
} m2i2_ablation_cell;

M2I2_API m2i2_status m2i2_ablate(const m2i2_config* base, const m2i2_ablate_options* options, m2i2_ablation** out);
M2I2_API void m2i2_ablation_destroy(m2i2_ablation* ablation);
M2I2_API size_t m2i2_ablation_cell_count(const m2i2_ablation* ablation);
M2I2_API m2i2_status m2i2_ablation_get_cell(const m2i2_ablation* ablation, size_t index, m2i2_ablation_cell* out);
/* Run directory of seed `run` of a cell. */
M2I2_API m2i2_status m2i2_ablation_run_dir(const m2i2_ablation* ablation, size_t index, size_t run, char* buf,
                                           size_t cap, size_t* len);

/* ---- artifacts ---- */

/* segments: "name:start:length,..." or NULL for the environment's blocks. */
M2I2_API m2i2_status m2i2_export(const char* run_dir, int episodes, uint64_t seed, const char* segments,
                                 double early_fraction, size_t* n_files);
M2I2_API m2i2_status m2i2_plot(const char* const* run_dirs, size_t n_runs, const char* out_dir, size_t* n_files);

/* ---- environments ---- */

typedef struct m2i2_env m2i2_env;

typedef struct m2i2_env_spec {
  int n_agents;
  int obs_dim;
  int state_dim;
  int n_actions;
  int episode_limit;
  int reports_win_rate;
} m2i2_env_spec;

typedef struct m2i2_step_result {
  double reward;
  int terminated;
  int truncated;
  int won;
} m2i2_step_result;

/* Built from the env.* keys of the configuration. */
M2I2_API m2i2_status m2i2_env_create(const m2i2_config* config, m2i2_env** out);
M2I2_API void m2i2_env_destroy(m2i2_env* env);
M2I2_API m2i2_status m2i2_env_get_spec(const m2i2_env* env, m2i2_env_spec* out);
/* obs: n_agents x obs_dim row-major; state may be NULL. */
M2I2_API m2i2_status m2i2_env_reset(m2i2_env* env, uint64_t seed, double* obs, size_t obs_len, double* state,
                                    size_t state_len);
M2I2_API m2i2_status m2i2_env_step(m2i2_env* env, const int* actions, size_t n_actions, m2i2_step_result* out,
                                   double* next_obs, size_t obs_len, double* next_state, size_t state_len);
/* n_actions 0/1 flags for one agent. */
M2I2_API m2i2_status m2i2_env_avail_actions(const m2i2_env* env, int agent, unsigned char* avail, size_t len);

/* ---- trained policies ---- */

typedef struct m2i2_policy m2i2_policy;

/* Decentralised controller restored from a checkpoint; seed drives
 * exploration and random masks. */
M2I2_API m2i2_status m2i2_policy_load(const char* checkpoint_path, uint64_t seed, m2i2_policy** out);
M2I2_API void m2i2_policy_destroy(m2i2_policy* policy);
M2I2_API m2i2_status m2i2_policy_get_spec(const m2i2_policy* policy, m2i2_env_spec* out);
/* Clears recurrent state; call at every episode start. */
M2I2_API m2i2_status m2i2_policy_reset(m2i2_policy* policy);
/* obs: n_agents x obs_dim row-major. avail (n_agents x n_actions flags) and
 * q (n_agents x n_actions) may be NULL. */
M2I2_API m2i2_status m2i2_policy_act(m2i2_policy* policy, const double* obs, size_t obs_len,
                                     const unsigned char* avail, double epsilon, int* actions, size_t n_agents,
                                     double* q, size_t q_len);

#ifdef __cplusplus
}
#endif

#endif
