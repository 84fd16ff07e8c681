#ifndef SKILLRATE_SKILLRATE_H
#define SKILLRATE_SKILLRATE_H

#include <stddef.h>
#include <stdint.h>

#if defined(SKR_BUILDING_LIBRARY)
#define SKR_API __attribute__((visibility("default")))
#else
#define SKR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum skr_status {
  SKR_OK = 0,
  SKR_ERR_USAGE = 1,
  SKR_ERR_INPUT = 2,
  SKR_ERR_NUMERICAL = 3,
  SKR_ERR_INTERNAL = 4
} skr_status;

typedef struct skr_dataset skr_dataset;
typedef struct skr_model skr_model;
typedef struct skr_run skr_run;
typedef struct skr_report skr_report;

/* Message of the last failure on the calling thread ("" if none). */
SKR_API const char* skr_last_error(void);
SKR_API const char* skr_version(void);

/* Paths given as "-" write to standard output. */

/* ---- datasets ---------------------------------------------------------- */

/* schema_path may be NULL for the canonical date,home,away,outcome layout. */
SKR_API skr_status skr_dataset_load(const char* path, const char* schema_path, skr_dataset** out);
/* Train holds matches strictly before the cutoff date, test the rest. */
SKR_API skr_status skr_dataset_split(const skr_dataset* data, const char* cutoff_date,
                                     skr_dataset** train, skr_dataset** test);
SKR_API skr_status skr_dataset_write_csv(const skr_dataset* data, const char* path);
SKR_API size_t skr_dataset_matches(const skr_dataset* data);
SKR_API size_t skr_dataset_players(const skr_dataset* data);
SKR_API double skr_dataset_draw_fraction(const skr_dataset* data);
/* Stream time (days since the first match) of a date string. */
SKR_API skr_status skr_dataset_time_of(const skr_dataset* data, const char* date, double* out);
SKR_API void skr_dataset_free(skr_dataset* data);

/* ---- models ------------------------------------------------------------ */

/* method: elo, glicko, ek, ts2, smc or discrete. */
SKR_API skr_status skr_model_create(const char* method, skr_model** out);
SKR_API skr_status skr_model_load_params(const char* path, skr_model** out);
SKR_API skr_status skr_model_save_params(const skr_model* model, const char* path);
SKR_API const char* skr_model_method(const skr_model* model);
/* Keys: sigma0 tau epsilon (or sigma_d tau_d epsilon_d), k kappa sigma_max
   particles seed states scale threads. */
SKR_API skr_status skr_model_set(skr_model* model, const char* key, double value);
SKR_API skr_status skr_model_get(const skr_model* model, const char* key, double* value);
/* logistic or probit */
SKR_API skr_status skr_model_set_sigmoid(skr_model* model, const char* name);
SKR_API skr_model* skr_model_clone(const skr_model* model);
SKR_API void skr_model_free(skr_model* model);

typedef struct skr_fit_info {
  size_t iterations;
  int converged;
  int diverged;
  double avg_nll; /* at the returned parameters */
} skr_fit_info;

/* EM from the model's current parameters; the model receives the result.
   trace_path (nullable) gets iteration,sigma0,tau,epsilon,avg_nll. */
SKR_API skr_status skr_model_fit_em(skr_model* model, const skr_dataset* data, size_t max_iters,
                                    double tol, const char* trace_path, skr_fit_info* info);
/* Grid search over (K, kappa) for elo or (sigma0, tau) for glicko; the model
   receives the best point. grid_path (nullable) gets p1,p2,avg_nll. */
SKR_API skr_status skr_model_fit_grid(skr_model* model, const skr_dataset* data, const double* p1,
                                      size_t n1, const double* p2, size_t n2,
                                      const char* grid_path, skr_fit_info* info);

/* ---- runs -------------------------------------------------------------- */

SKR_API skr_status skr_run_filter(const skr_model* model, const skr_dataset* data, skr_run** out);
SKR_API skr_status skr_run_smooth(skr_run* run);
SKR_API double skr_run_log_likelihood(const skr_run* run);
SKR_API double skr_run_avg_nll(const skr_run* run);
/* probs = (home win, away win, draw) of 0-based match k. */
SKR_API skr_status skr_run_match_probs(const skr_run* run, size_t match, double probs[3]);

#define SKR_UNKNOWN_HOME 1
#define SKR_UNKNOWN_AWAY 2

/* Fixture at a date; unknown players start from the prior and set flags. */
SKR_API skr_status skr_run_predict(const skr_run* run, const char* home, const char* away,
                                   const char* date, double probs[3], int* flags);
/* Reads date,home,away rows and writes
   date,home,away,p_home,p_away,p_draw,home_unknown,away_unknown. */
SKR_API skr_status skr_run_predict_file(const skr_run* run, const char* fixtures_path,
                                        const char* out_path);
SKR_API skr_status skr_run_write_ratings(const skr_run* run, const char* path);
SKR_API skr_status skr_run_write_smooth(const skr_run* run, const char* path);
SKR_API skr_status skr_run_write_particles(const skr_run* run, const char* path);
SKR_API skr_status skr_run_write_categorical(const skr_run* run, const char* path, int summary);
SKR_API skr_status skr_run_export_trajectory(const skr_run* run, const char* player, const char* path);
SKR_API void skr_run_free(skr_run* run);

/* ---- evaluation -------------------------------------------------------- */

typedef struct skr_eval_result {
  double train_avg_nll; /* NaN when unavailable */
  double test_avg_nll;
  size_t train_matches;
  size_t test_matches;
  double train_draw_fraction;
  double test_draw_fraction;
  int available;
} skr_eval_result;

SKR_API skr_report* skr_report_create(void);
/* Appends one (method, dataset) cell: train then test in one sweep. */
SKR_API skr_status skr_report_evaluate(skr_report* report, const skr_model* model,
                                       const skr_dataset* train, const skr_dataset* test,
                                       const char* dataset_name, skr_eval_result* result);
SKR_API skr_status skr_report_write_csv(const skr_report* report, const char* path);
SKR_API skr_status skr_report_write_table(const skr_report* report, const char* path);
SKR_API void skr_report_free(skr_report* report);

#ifdef __cplusplus
}
#endif

#endif
