/**
 * Copyright 2026 The HetMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef HETMATCH_HETMATCH_H_
#define HETMATCH_HETMATCH_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define HM_API __declspec(dllexport)
#else
#define HM_API __attribute__((visibility("default")))
#endif

/* Status codes; the CLI uses them verbatim as exit codes. */
typedef enum hm_status {
  HM_OK = 0,
  HM_ERR_INTERNAL = 1,
  HM_ERR_USAGE = 2,
  HM_ERR_DATA = 3,
  HM_ERR_NUMERIC = 4
} hm_status;

typedef struct hm_config hm_config;
typedef struct hm_dataset hm_dataset;
typedef struct hm_model hm_model;

/* Message of the last failed call on this thread ("" if none). */
HM_API const char* hm_last_error(void);
HM_API const char* hm_version(void);
/* Frees strings returned through char** out-parameters. */
HM_API void hm_string_free(char* s);

/* Flat key = value configuration. Later calls override earlier ones. */
HM_API hm_status hm_config_new(hm_config** out);
HM_API void hm_config_free(hm_config* cfg);
HM_API hm_status hm_config_load(hm_config* cfg, const char* path);
HM_API hm_status hm_config_set(hm_config* cfg, const char* key, const char* value);
/* Resolved configuration (defaults included) as key = value text. */
HM_API hm_status hm_config_describe(const hm_config* cfg, char** out_text);

/* Synthetic generator: writes edges.tsv, nodes.tsv, labels.tsv,
   eval_task.tsv and synth_manifest.txt into out_dir. */
HM_API hm_status hm_synth_generate(const hm_config* cfg, const char* out_dir);

/* labels_path and task_path may be NULL. */
HM_API hm_status hm_dataset_load(const char* edges_path, const char* nodes_path,
                                 const char* labels_path, const char* task_path,
                                 hm_dataset** out);
HM_API void hm_dataset_free(hm_dataset* ds);
/* Node and edge counts plus input fingerprints, as key = value text. */
HM_API hm_status hm_dataset_summary(const hm_dataset* ds, char** out_text);

/* Untrained model with the configured architecture and seed. */
HM_API hm_status hm_model_init(const hm_dataset* ds, const hm_config* cfg, hm_model** out);
/* Initialises and trains the configured model. */
HM_API hm_status hm_train(const hm_dataset* ds, const hm_config* cfg, hm_model** out);
HM_API void hm_model_free(hm_model* m);
HM_API hm_status hm_model_save(const hm_model* m, const char* path);
HM_API hm_status hm_model_load(const char* path, hm_model** out);
/* Run manifest of the model's training run as key = value text. */
HM_API hm_status hm_model_manifest(const hm_model* m, char** out_text);
/* Per-batch mean losses, one per line. */
HM_API hm_status hm_model_loss_log(const hm_model* m, char** out_text);
/* Number of parameters that differ bitwise between two models (0 = identical). */
HM_API hm_status hm_model_compare(const hm_model* a, const hm_model* b, size_t* differing);

/* HM_ERR_DATA when a size explicitly set in cfg (d, l, m, kappa) differs
   from the model's. */
HM_API hm_status hm_model_check_config(const hm_model* m, const hm_config* cfg);

/* Embedding dump of every ad and keyword in every trained view. */
HM_API hm_status hm_embed(const hm_model* m, const hm_dataset* ds, const char* out_path);
/* Category-constrained top-depth lists for every task ad, one line per
   (ad, view): "ad_id view kw,kw,...". */
HM_API hm_status hm_retrieve(const char* embeddings_path, const hm_dataset* ds, size_t depth,
                             const char* out_path);
/* Scores a retrieved-lists file against the dataset's task at the configured
   K values. Text table and tab-separated rows are returned. */
HM_API hm_status hm_evaluate(const hm_dataset* ds, const char* retrieved_path,
                             const hm_config* cfg, char** out_report, char** out_tsv);
/* Finite-difference check of the configured model on the first labelled pairs. */
HM_API hm_status hm_gradcheck(const hm_dataset* ds, const hm_config* cfg, char** out_report,
                              double* max_rel_error);
/* Trains and evaluates every configured variant. */
HM_API hm_status hm_ablate(const hm_dataset* ds, const hm_config* cfg, char** out_report,
                           char** out_tsv);

#ifdef __cplusplus
}
#endif

#endif  // HETMATCH_HETMATCH_H_
