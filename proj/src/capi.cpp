// Copyright 2026 The mmtts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmtts/mmtts.h"

#include <cstdio>
#include <cstring>
#include <string>

#include "config.h"
#include "evalmetrics.h"
#include "pipeline.h"
#include "text_frontend.h"
#include "toygen.h"
#include "util.h"

struct mmtts_config {
  mmtts::ToolkitConfig cfg;
};

namespace {

thread_local std::string g_last_error;

mmtts_status map_code(mmtts::StatusCode code) {
  switch (code) {
    case mmtts::StatusCode::kOk: return MMTTS_OK;
    case mmtts::StatusCode::kInvalidArgument: return MMTTS_INVALID_ARGUMENT;
    case mmtts::StatusCode::kParseError: return MMTTS_PARSE_ERROR;
    case mmtts::StatusCode::kNotFound: return MMTTS_NOT_FOUND;
    case mmtts::StatusCode::kIoError: return MMTTS_IO_ERROR;
    case mmtts::StatusCode::kNumericError: return MMTTS_NUMERIC_ERROR;
    case mmtts::StatusCode::kInternal: return MMTTS_INTERNAL_ERROR;
  }
  return MMTTS_INTERNAL_ERROR;
}

template <typename F>
mmtts_status wrap(F&& body) noexcept {
  try {
    body();
    g_last_error.clear();
    return MMTTS_OK;
  } catch (const mmtts::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MMTTS_INTERNAL_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return MMTTS_INTERNAL_ERROR;
  }
}

char* copy_out(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* name) {
  if (!p) mmtts::fail(mmtts::StatusCode::kInvalidArgument, name, " must not be null");
}

}  // namespace

extern "C" {

const char* mmtts_version(void) { return "0.1.0"; }

const char* mmtts_last_error(void) { return g_last_error.c_str(); }

void mmtts_string_free(char* s) { delete[] s; }

mmtts_status mmtts_config_create(mmtts_config** out_config) {
  return wrap([&] {
    require(out_config, "out_config");
    *out_config = new mmtts_config{};
  });
}

mmtts_status mmtts_config_load(const char* path, mmtts_config** out_config) {
  return wrap([&] {
    require(path, "path");
    require(out_config, "out_config");
    *out_config = new mmtts_config{mmtts::ToolkitConfig::load(path)};
  });
}

mmtts_status mmtts_config_set(mmtts_config* config, const char* key, const char* value) {
  return wrap([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->cfg.set_key(key, value);
  });
}

mmtts_status mmtts_config_emit(const mmtts_config* config, char** out_text) {
  return wrap([&] {
    require(config, "config");
    require(out_text, "out_text");
    *out_text = copy_out(config->cfg.emit());
  });
}

void mmtts_config_free(mmtts_config* config) { delete config; }

mmtts_status mmtts_make_toy_corpus(const char* out_dir, int n_speakers, int n_utterances,
                                   uint64_t seed, char** out_manifest_path) {
  return wrap([&] {
    require(out_dir, "out_dir");
    mmtts::ToyCorpusOptions options;
    if (n_speakers > 0) options.n_speakers = n_speakers;
    if (n_utterances > 0) options.n_utterances = n_utterances;
    options.seed = seed;
    const mmtts::ToyCorpus corpus = mmtts::make_toy_corpus(out_dir, options);
    if (out_manifest_path) *out_manifest_path = copy_out(corpus.manifest_path);
  });
}

mmtts_status mmtts_prepare(const mmtts_config* config, const char* manifest_path,
                           const char* cache_dir, char** out_summary) {
  return wrap([&] {
    require(config, "config");
    require(manifest_path, "manifest_path");
    require(cache_dir, "cache_dir");
    const std::string summary = mmtts::prepare_corpus(config->cfg, manifest_path, cache_dir);
    if (out_summary) *out_summary = copy_out(summary);
  });
}

mmtts_status mmtts_augment(const mmtts_config* config, const char* manifest_path,
                           const char* out_dir, uint64_t seed, char** out_manifest_path,
                           char** out_summary) {
  return wrap([&] {
    require(config, "config");
    require(manifest_path, "manifest_path");
    require(out_dir, "out_dir");
    std::string summary;
    const std::string merged =
        mmtts::augment_corpus(config->cfg, manifest_path, out_dir, seed, &summary);
    if (out_manifest_path) *out_manifest_path = copy_out(merged);
    if (out_summary) *out_summary = copy_out(summary);
  });
}

mmtts_status mmtts_train(const mmtts_config* config, const char* cache_dir,
                         const char* checkpoint_path, int verbose, char** out_summary) {
  return wrap([&] {
    require(config, "config");
    require(cache_dir, "cache_dir");
    require(checkpoint_path, "checkpoint_path");
    mmtts::TrainLogger logger;
    if (verbose) {
      logger = [](int, const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
    }
    const std::string summary =
        mmtts::train_from_cache(config->cfg, cache_dir, checkpoint_path, std::move(logger));
    if (out_summary) *out_summary = copy_out(summary);
  });
}

mmtts_status mmtts_synthesize(const char* checkpoint_path, const char* ipa_text,
                              const char* speaker, const char* accent, const char* mode,
                              double sigma, uint64_t seed, const char* out_path,
                              char** out_summary) {
  return wrap([&] {
    require(checkpoint_path, "checkpoint_path");
    require(ipa_text, "ipa_text");
    require(speaker, "speaker");
    require(accent, "accent");
    require(out_path, "out_path");
    const std::string summary =
        mmtts::synthesize_to_file(checkpoint_path, ipa_text, speaker, accent,
                                  mode ? mode : "", sigma, seed, out_path);
    if (out_summary) *out_summary = copy_out(summary);
  });
}

mmtts_status mmtts_evaluate(const mmtts_config* config, const char* synth_manifest_path,
                            const char* reference_manifest_path, const char* embedding_cmd,
                            const char* transcript_cmd, const char* report_path,
                            char** out_table) {
  return wrap([&] {
    require(config, "config");
    require(synth_manifest_path, "synth_manifest_path");
    require(reference_manifest_path, "reference_manifest_path");
    require(report_path, "report_path");
    const std::string table = mmtts::evaluate_to_report(
        config->cfg, synth_manifest_path, reference_manifest_path,
        embedding_cmd ? embedding_cmd : "", transcript_cmd ? transcript_cmd : "", report_path);
    if (out_table) *out_table = copy_out(table);
  });
}

mmtts_status mmtts_character_error_rate(const char* reference, const char* hypothesis,
                                        double* out_cer) {
  return wrap([&] {
    require(reference, "reference");
    require(hypothesis, "hypothesis");
    require(out_cer, "out_cer");
    *out_cer = mmtts::character_error_rate(reference, hypothesis);
  });
}

mmtts_status mmtts_cosine_similarity(const double* a, const double* b, size_t dim,
                                     double* out_similarity) {
  return wrap([&] {
    require(a, "a");
    require(b, "b");
    require(out_similarity, "out_similarity");
    mmtts::EmbeddingVector va, vb;
    va.values.assign(a, a + dim);
    vb.values.assign(b, b + dim);
    *out_similarity = mmtts::cosine_similarity(va, vb);
  });
}

mmtts_status mmtts_tokenize(const char* inventory_path, const char* ipa_text,
                            char** out_ids_csv) {
  return wrap([&] {
    require(inventory_path, "inventory_path");
    require(ipa_text, "ipa_text");
    require(out_ids_csv, "out_ids_csv");
    const mmtts::PhonemeInventory inventory =
        mmtts::PhonemeInventory::load_file(inventory_path);
    const mmtts::TokenSequence tokens = mmtts::tokenize_ipa(ipa_text, inventory);
    std::string csv;
    for (size_t i = 0; i < tokens.ids.size(); ++i) {
      if (i) csv += ",";
      csv += std::to_string(tokens.ids[i]);
    }
    *out_ids_csv = copy_out(csv);
  });
}

}  // extern "C"
