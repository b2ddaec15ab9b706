/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#ifndef EIM_EIM_H_
#define EIM_EIM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(EIM_BUILDING_LIBRARY)
#define EIM_API __declspec(dllexport)
#else
#define EIM_API __declspec(dllimport)
#endif
#else
#define EIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eim_status {
  EIM_OK = 0,
  EIM_ERR_INPUT = 1,
  EIM_ERR_CONFIG = 2,
  EIM_ERR_NUMERICAL = 3,
  EIM_ERR_IO = 4,
  EIM_ERR_UNSUPPORTED = 5,
  EIM_ERR_INTERNAL = 6
} eim_status;

typedef struct eim_config eim_config;
typedef struct eim_gmm eim_gmm;

/* Message of the last failed call on this thread ("" after success). */
EIM_API const char* eim_last_error(void);
EIM_API const char* eim_version(void);

/* Configuration: every key has a documented default. */
EIM_API eim_status eim_config_create(eim_config** out);
EIM_API void eim_config_free(eim_config* cfg);
/* Merges a config file into `cfg`. */
EIM_API eim_status eim_config_load(eim_config* cfg, const char* path);
EIM_API eim_status eim_config_set(eim_config* cfg, const char* key, const char* value);
/* Copies the value (NUL terminated) into buf; *needed receives the length
   including the terminator. A NULL buf only reports the size; a non-NULL buf
   that is too small fails with EIM_ERR_INPUT. */
EIM_API eim_status eim_config_get(const eim_config* cfg, const char* key, char* buf, size_t size, size_t* needed);
/* Resolved snapshot text, same buffer protocol as eim_config_get. */
EIM_API eim_status eim_config_dump(const eim_config* cfg, char* buf, size_t size, size_t* needed);

/* Experiment commands. */
EIM_API eim_status eim_gen_data(const eim_config* cfg, const char* out_dir);
EIM_API eim_status eim_fit(const eim_config* cfg, const char* task_dir, const char* out_dir);
/* metrics: comma separated list or NULL/"" for the task defaults. Rows are
   appended to out_csv; the CSV text is also copied to buf when non-NULL. */
EIM_API eim_status eim_eval(const char* model_path, const char* task_dir, const char* metrics, size_t n, uint64_t seed,
                            const char* out_csv, char* buf, size_t size, size_t* needed);
/* Writes out_dir/sweep.csv; *rows receives the number of runs. */
EIM_API eim_status eim_sweep(const eim_config* cfg, const char* out_dir, size_t* rows);

/* Gaussian mixture models. Arrays are row major. */
EIM_API eim_status eim_gmm_create(int dim, int components, const double* weights, const double* means,
                                  const double* covariances, eim_gmm** out);
EIM_API eim_status eim_gmm_load(const char* path, eim_gmm** out);
EIM_API eim_status eim_gmm_save(const eim_gmm* gmm, const char* path);
EIM_API void eim_gmm_free(eim_gmm* gmm);
EIM_API int eim_gmm_dim(const eim_gmm* gmm);
EIM_API int eim_gmm_components(const eim_gmm* gmm);
/* out[i] = log q(x_i) for n row-major points. */
EIM_API eim_status eim_gmm_log_density(const eim_gmm* gmm, const double* x, size_t n, double* out);
/* n x dim samples into x; labels may be NULL. */
EIM_API eim_status eim_gmm_sample(const eim_gmm* gmm, size_t n, uint64_t seed, double* x, int* labels);
/* Monte Carlo KL(model || target) with its standard error. */
EIM_API eim_status eim_gmm_i_projection(const eim_gmm* model, const eim_gmm* target, size_t n, uint64_t seed,
                                        double* value, double* stderr_out);

/* Closed-form divergences. */
EIM_API eim_status eim_kl_gaussian(int dim, const double* mean_a, const double* cov_a, const double* mean_b,
                                   const double* cov_b, double* out);
EIM_API eim_status eim_kl_categorical(size_t k, const double* a, const double* b, double* out);

#ifdef __cplusplus
}
#endif

#endif /* EIM_EIM_H_ */
