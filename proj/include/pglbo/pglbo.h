/*
 * Copyright 2026 The pglbo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PGLBO_PGLBO_H
#define PGLBO_PGLBO_H

#include <stddef.h>
#include <stdint.h>

#if defined(PGLBO_BUILDING_LIBRARY)
#define PGLBO_API __attribute__((visibility("default")))
#else
#define PGLBO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pglbo_status {
  PGLBO_OK = 0,
  PGLBO_ERR_INVALID_ARGUMENT = 1,
  PGLBO_ERR_CONFIG = 2,
  PGLBO_ERR_SHAPE = 3,
  PGLBO_ERR_DECOMPOSITION = 4,
  PGLBO_ERR_NUMERICAL = 5,
  PGLBO_ERR_FIT = 6,
  PGLBO_ERR_TRAINING = 7,
  PGLBO_ERR_STATE = 8,
  PGLBO_ERR_IO = 9,
  PGLBO_ERR_EVALUATION = 10,
  PGLBO_ERR_INTERNAL = 99
} pglbo_status;

typedef struct pglbo_config pglbo_config;
typedef struct pglbo_vae pglbo_vae;
typedef struct pglbo_run pglbo_run;

/* Message of the last failed call on this thread; empty after a success. */
PGLBO_API const char* pglbo_last_error(void);
PGLBO_API const char* pglbo_version(void);

/* Strings returned through char** out-parameters are released with this. */
PGLBO_API void pglbo_string_free(char* s);

/* Configuration. */
PGLBO_API pglbo_status pglbo_config_new(const char* task, pglbo_config** out);
PGLBO_API pglbo_status pglbo_config_load(const char* path, pglbo_config** out);
PGLBO_API pglbo_status pglbo_config_parse(const char* text, pglbo_config** out);
PGLBO_API pglbo_status pglbo_config_set(pglbo_config* cfg, const char* key, const char* value);
PGLBO_API pglbo_status pglbo_config_get(const pglbo_config* cfg, const char* key, char** value);
PGLBO_API pglbo_status pglbo_config_to_text(const pglbo_config* cfg, char** text);
PGLBO_API pglbo_status pglbo_config_reference(char** markdown);
PGLBO_API void pglbo_config_free(pglbo_config* cfg);

/* Pretrains a VAE on the task's unlabeled pool for this seed. */
PGLBO_API pglbo_status pglbo_pretrain(const pglbo_config* cfg, uint64_t seed, pglbo_vae** out);
/* The checkpoint also records the config. */
PGLBO_API pglbo_status pglbo_vae_save(const pglbo_vae* vae, const pglbo_config* cfg, const char* path);
PGLBO_API pglbo_status pglbo_vae_load(const char* path, pglbo_vae** out);
PGLBO_API uint64_t pglbo_vae_fingerprint(const pglbo_vae* vae);
PGLBO_API size_t pglbo_vae_parameter_count(const pglbo_vae* vae);
PGLBO_API double pglbo_vae_final_pretrain_loss(const pglbo_vae* vae);
PGLBO_API void pglbo_vae_free(pglbo_vae* vae);

/* One run of a variant (lsbo, lbo, plbo, glbo, pglbo). vae may be NULL, in
 * which case the seed's VAE is pretrained. Writes traces/, summary files,
 * checkpoint.pglb (after every round) and gp.pglb (final VAE and GP) under
 * out_dir. max_rounds > 0 stops after that many rounds; the checkpoint can be
 * resumed with pglbo_resume. */
PGLBO_API pglbo_status pglbo_optimize(const pglbo_config* cfg, const char* variant, uint64_t seed,
                                      const pglbo_vae* vae, const char* out_dir, size_t max_rounds,
                                      pglbo_run** out);
PGLBO_API pglbo_status pglbo_resume(const char* checkpoint_path, const char* out_dir, size_t max_rounds,
                                    pglbo_run** out);
PGLBO_API double pglbo_run_best_value(const pglbo_run* run);
PGLBO_API size_t pglbo_run_evaluations(const pglbo_run* run);
PGLBO_API size_t pglbo_run_rounds_done(const pglbo_run* run);
PGLBO_API int pglbo_run_completed(const pglbo_run* run);
PGLBO_API void pglbo_run_free(pglbo_run* run);

/* Runs the (variant x seed) grid of an experiment file. workers = 0 uses the
 * file's workers key. */
PGLBO_API pglbo_status pglbo_ablate(const char* spec_path, const char* out_dir, size_t workers, char** summary_csv);

/* Regenerates summaries from the traces under dir; format is "csv" or "md". */
PGLBO_API pglbo_status pglbo_report(const char* dir, const char* format, char** summary);

/* Variance vs pseudo-label error diagnostic. has_spearman is 0 when the
 * correlation is undefined. */
PGLBO_API pglbo_status pglbo_diagnose_threshold(const char* vae_path, const char* gp_path, size_t n, size_t group,
                                                uint64_t seed, const char* out_csv, double* spearman,
                                                int* has_spearman);

#ifdef __cplusplus
}
#endif

#endif /* PGLBO_PGLBO_H */
