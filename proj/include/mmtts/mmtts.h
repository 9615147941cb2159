/* Copyright 2026 The mmtts Authors
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

/* C API of the mmtts toolkit. All functions return a status code; on
 * failure, mmtts_last_error() holds a message for the calling thread.
 * Strings returned through char** out-parameters are owned by the caller
 * and must be released with mmtts_string_free(). */

#ifndef MMTTS_MMTTS_H_
#define MMTTS_MMTTS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MMTTS_API __declspec(dllexport)
#else
#define MMTTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmtts_status {
  MMTTS_OK = 0,
  MMTTS_INVALID_ARGUMENT = 1,
  MMTTS_PARSE_ERROR = 2,
  MMTTS_NOT_FOUND = 3,
  MMTTS_IO_ERROR = 4,
  MMTTS_NUMERIC_ERROR = 5,
  MMTTS_INTERNAL_ERROR = 6
} mmtts_status;

MMTTS_API const char* mmtts_version(void);

/* Message for the most recent failing call on this thread ("" when none).
 * The pointer stays valid until the next library call on the same thread. */
MMTTS_API const char* mmtts_last_error(void);

MMTTS_API void mmtts_string_free(char* s);

/* ---------------------------------------------------------------- config */

/* Opaque key-value configuration; see the documented schema for keys.
 * Unknown keys are rejected. */
typedef struct mmtts_config mmtts_config;

MMTTS_API mmtts_status mmtts_config_create(mmtts_config** out_config);
MMTTS_API mmtts_status mmtts_config_load(const char* path, mmtts_config** out_config);
MMTTS_API mmtts_status mmtts_config_set(mmtts_config* config, const char* key, const char* value);
MMTTS_API mmtts_status mmtts_config_emit(const mmtts_config* config, char** out_text);
MMTTS_API void mmtts_config_free(mmtts_config* config);

/* -------------------------------------------------------------- pipeline */

/* Writes a synthetic vowel corpus (wavs + manifest.txt + config.cfg) under
 * out_dir. Pass 0 for n_speakers/n_utterances to get the defaults (4/32). */
MMTTS_API mmtts_status mmtts_make_toy_corpus(const char* out_dir, int n_speakers,
                                             int n_utterances, uint64_t seed,
                                             char** out_manifest_path);

/* Validates the dataset, builds the phoneme inventory, extracts features
 * into cache_dir, and freezes speaker F0 / corpus energy statistics. */
MMTTS_API mmtts_status mmtts_prepare(const mmtts_config* config, const char* manifest_path,
                                     const char* cache_dir, char** out_summary);

/* Applies the six augmentation strata; writes wavs and a merged manifest
 * under out_dir and returns that manifest's path. */
MMTTS_API mmtts_status mmtts_augment(const mmtts_config* config, const char* manifest_path,
                                     const char* out_dir, uint64_t seed,
                                     char** out_manifest_path, char** out_summary);

/* Trains on a prepared cache; writes the checkpoint and a loss trace JSON
 * next to it. verbose != 0 logs progress lines to stderr. */
MMTTS_API mmtts_status mmtts_train(const mmtts_config* config, const char* cache_dir,
                                   const char* checkpoint_path, int verbose, char** out_summary);

/* Renders ipa_text as `speaker` speaking in `accent`, writing a mel bundle
 * to out_path. mode is "rt", "rm", or "" for the checkpoint's mode. */
MMTTS_API mmtts_status mmtts_synthesize(const char* checkpoint_path, const char* ipa_text,
                                        const char* speaker, const char* accent, const char* mode,
                                        double sigma, uint64_t seed, const char* out_path,
                                        char** out_summary);

/* Scores synthesized items (lines "path|speaker|accent|text") against
 * reference embeddings built from the real corpus manifest. Empty command
 * strings select the built-in hermetic providers. Writes a JSON report to
 * report_path and returns the human-readable table. */
MMTTS_API mmtts_status mmtts_evaluate(const mmtts_config* config, const char* synth_manifest_path,
                                      const char* reference_manifest_path,
                                      const char* embedding_cmd, const char* transcript_cmd,
                                      const char* report_path, char** out_table);

/* ------------------------------------------------------------- utilities */

MMTTS_API mmtts_status mmtts_character_error_rate(const char* reference, const char* hypothesis,
                                                  double* out_cer);

MMTTS_API mmtts_status mmtts_cosine_similarity(const double* a, const double* b, size_t dim,
                                               double* out_similarity);

/* Tokenizes IPA text against a saved inventory; out_ids_csv receives
 * comma-separated token ids. */
MMTTS_API mmtts_status mmtts_tokenize(const char* inventory_path, const char* ipa_text,
                                      char** out_ids_csv);

#ifdef __cplusplus
}
#endif

#endif /* MMTTS_MMTTS_H_ */
