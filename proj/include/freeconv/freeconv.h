#ifndef FREECONV_FREECONV_H
#define FREECONV_FREECONV_H

#include <stddef.h>
#include <stdint.h>

#if defined(FREECONV_BUILDING)
#define FC_API __attribute__((visibility("default")))
#else
#define FC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fc_status {
  FC_OK = 0,
  FC_INVALID_ARGUMENT = 1,
  FC_PARSE = 2,
  FC_NOT_CONVERGED = 3,
  FC_SOLVER_FAILURE = 4,
  FC_PRECONDITION = 5,
  FC_CONFIG = 6,
  FC_IO = 7,
  FC_INTERNAL = 99
} fc_status;

typedef struct fc_pencil fc_pencil;
typedef struct fc_result fc_result;

typedef enum fc_model_kind { FC_SEMICIRCULAR = 0, FC_MARCHENKO_PASTUR = 1 } fc_model_kind;

typedef struct fc_run_options {
  uint64_t seed;
  int has_seed;
  /* <= 0 selects all hardware threads */
  int workers;
} fc_run_options;

FC_API const char* fc_version(void);

/* Message of the last failed call on this thread; empty after success. */
FC_API const char* fc_last_error(void);

/* coeffs holds r + 1 row-major m x m matrices of interleaved (re, im) doubles. */
FC_API fc_status fc_pencil_create(int m, int r, const double* coeffs, fc_pencil** out);
FC_API void fc_pencil_destroy(fc_pencil* pencil);
FC_API int fc_pencil_m(const fc_pencil* pencil);
FC_API int fc_pencil_r(const fc_pencil* pencil);

/* lambda and g_out: m x m row-major interleaved (re, im). */
FC_API fc_status fc_solve_G(const fc_pencil* pencil, fc_model_kind model, double alpha, const double* lambda,
                            double* g_out, double* residual_out);

FC_API fc_status fc_norm_prediction(const char* polynomial, int generators, fc_model_kind model, double alpha,
                                    double* out);

FC_API fc_status fc_kappa4(const char* distribution, double* out);

/* Strings returned through char** are released with fc_free_string. */
FC_API fc_status fc_describe(const char* experiment, char** out);
/* Newline-separated experiment names. */
FC_API fc_status fc_experiment_names(char** out);
FC_API void fc_free_string(char* s);

FC_API fc_status fc_run(const char* experiment, const char* config_json, const fc_run_options* options,
                        fc_result** out);
FC_API void fc_result_destroy(fc_result* result);
FC_API int fc_result_passed(const fc_result* result);
FC_API const char* fc_result_json(const fc_result* result);
FC_API const char* fc_result_csv(const fc_result* result);
FC_API const char* fc_result_hash(const fc_result* result);
FC_API double fc_result_wall_seconds(const fc_result* result);
/* Config "output" field, "." when absent. */
FC_API const char* fc_result_output_dir(const fc_result* result);
/* Contract lines "name: pass|FAIL value [lower, upper] detail", newline separated. */
FC_API const char* fc_result_summary(const fc_result* result);
/* Writes <out_dir>/<experiment>-<hash>.json and .csv. */
FC_API fc_status fc_result_write(const fc_result* result, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
