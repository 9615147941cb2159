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

// Command-line front end. Links the C API only; exit codes are 0 success,
// 1 validation/argument error, 2 runtime error.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mmtts/mmtts.h"

namespace {

int exit_code_for(mmtts_status status) {
  switch (status) {
    case MMTTS_OK:
      return 0;
    case MMTTS_INVALID_ARGUMENT:
    case MMTTS_PARSE_ERROR:
    case MMTTS_NOT_FOUND:
      return 1;
    default:
      return 2;
  }
}

int report(mmtts_status status) {
  if (status != MMTTS_OK) {
    std::fprintf(stderr, "error: %s\n", mmtts_last_error());
  }
  return exit_code_for(status);
}

void print_owned(char* text) {
  if (!text) return;
  std::printf("%s\n", text);
  mmtts_string_free(text);
}

struct ConfigHandle {
  mmtts_config* ptr = nullptr;
  ~ConfigHandle() { mmtts_config_free(ptr); }
};

// Loads --config (or defaults) and applies --set key=value overrides.
mmtts_status load_config(const std::string& path, const std::vector<std::string>& overrides,
                         ConfigHandle* out) {
  mmtts_status status =
      path.empty() ? mmtts_config_create(&out->ptr) : mmtts_config_load(path.c_str(), &out->ptr);
  if (status != MMTTS_OK) return status;
  for (const std::string& kv : overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return MMTTS_INVALID_ARGUMENT;
    }
    status = mmtts_config_set(out->ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (status != MMTTS_OK) return status;
  }
  return MMTTS_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmtts: multilingual multiaccent TTS toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mmtts_version()));

  std::string config_path, manifest_path, cache_dir, checkpoint_path, out_path;
  std::string text, speaker, accent, mode, references_path;
  std::string embedding_cmd, transcript_cmd;
  std::vector<std::string> overrides;
  double sigma = 0.0;
  uint64_t seed = 0;
  bool deterministic = false;
  bool quiet = false;
  int toy_speakers = 4, toy_utterances = 32;

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "toolkit config file");
    cmd->add_option("--set", overrides, "override a config key (key=value, repeatable)");
  };

  CLI::App* toy = app.add_subcommand("make-toy-corpus", "generate a synthetic vowel corpus");
  toy->add_option("--out", out_path, "output directory")->required();
  toy->add_option("--speakers", toy_speakers, "number of speakers (default 4)");
  toy->add_option("--utterances", toy_utterances, "number of utterances (default 32)");
  toy->add_option("--seed", seed, "generation seed");

  CLI::App* prepare = app.add_subcommand("prepare", "validate dataset and cache features");
  add_config_flags(prepare);
  prepare->add_option("--manifest", manifest_path, "dataset manifest")->required();
  prepare->add_option("--cache-dir", cache_dir, "feature cache directory")->required();

  CLI::App* augment = app.add_subcommand("augment", "apply the six DSP augmentation strata");
  add_config_flags(augment);
  augment->add_option("--manifest", manifest_path, "dataset manifest")->required();
  augment->add_option("--out", out_path, "output directory for wavs + merged manifest")
      ->required();
  augment->add_option("--seed", seed, "factor-sampling seed");

  CLI::App* train = app.add_subcommand("train", "train a model from a prepared cache");
  add_config_flags(train);
  train->add_option("--cache-dir", cache_dir, "feature cache directory")->required();
  train->add_option("--checkpoint", checkpoint_path, "output checkpoint path")->required();
  train->add_flag("--deterministic", deterministic,
                  "single-threaded bit-reproducible run (always on; flag documents intent)");
  train->add_flag("--quiet", quiet, "suppress per-step progress");

  CLI::App* synth = app.add_subcommand("synthesize", "render IPA text as a speaker in an accent");
  synth->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  synth->add_option("--text", text, "IPA text to render")->required();
  synth->add_option("--speaker", speaker, "speaker name from the training manifest")->required();
  synth->add_option("--accent", accent, "accent name from the training manifest")->required();
  synth->add_option("--mode", mode, "rt or rm (default: checkpoint's mode)")
      ->check(CLI::IsMember({"rt", "rm"}));
  synth->add_option("--sigma", sigma, "sampling temperature (default 0)");
  synth->add_option("--seed", seed, "sampling seed");
  synth->add_flag("--deterministic", deterministic,
                  "single-threaded bit-reproducible run (always on; flag documents intent)");
  synth->add_option("--out", out_path, "output mel bundle path")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "score synthesized samples");
  add_config_flags(evaluate);
  evaluate->add_option("--manifest", manifest_path, "synth set: lines path|speaker|accent|text")
      ->required();
  evaluate->add_option("--references", references_path, "real corpus manifest for references")
      ->required();
  evaluate->add_option("--embedding-cmd", embedding_cmd,
                       "external embedding provider command (default: built-in mel-stats)");
  evaluate->add_option("--transcript-cmd", transcript_cmd,
                       "external transcript provider command (default: built-in echo)");
  evaluate->add_option("--out", out_path, "report JSON path")->required();

  CLI11_PARSE(app, argc, argv);
  (void)deterministic;  // runs are always single-threaded and seeded

  if (toy->parsed()) {
    char* manifest = nullptr;
    const mmtts_status status =
        mmtts_make_toy_corpus(out_path.c_str(), toy_speakers, toy_utterances, seed, &manifest);
    if (status == MMTTS_OK) print_owned(manifest);
    return report(status);
  }

  if (prepare->parsed()) {
    ConfigHandle cfg;
    mmtts_status status = load_config(config_path, overrides, &cfg);
    if (status != MMTTS_OK) return report(status);
    char* summary = nullptr;
    status = mmtts_prepare(cfg.ptr, manifest_path.c_str(), cache_dir.c_str(), &summary);
    if (status == MMTTS_OK) print_owned(summary);
    return report(status);
  }

  if (augment->parsed()) {
    ConfigHandle cfg;
    mmtts_status status = load_config(config_path, overrides, &cfg);
    if (status != MMTTS_OK) return report(status);
    char* merged = nullptr;
    char* summary = nullptr;
    status = mmtts_augment(cfg.ptr, manifest_path.c_str(), out_path.c_str(), seed, &merged,
                           &summary);
    if (status == MMTTS_OK) {
      print_owned(summary);
      print_owned(merged);
    }
    return report(status);
  }

  if (train->parsed()) {
    ConfigHandle cfg;
    mmtts_status status = load_config(config_path, overrides, &cfg);
    if (status != MMTTS_OK) return report(status);
    char* summary = nullptr;
    status = mmtts_train(cfg.ptr, cache_dir.c_str(), checkpoint_path.c_str(), quiet ? 0 : 1,
                         &summary);
    if (status == MMTTS_OK) print_owned(summary);
    return report(status);
  }

  if (synth->parsed()) {
    char* summary = nullptr;
    const mmtts_status status =
        mmtts_synthesize(checkpoint_path.c_str(), text.c_str(), speaker.c_str(), accent.c_str(),
                         mode.c_str(), sigma, seed, out_path.c_str(), &summary);
    if (status == MMTTS_OK) print_owned(summary);
    return report(status);
  }

  if (evaluate->parsed()) {
    ConfigHandle cfg;
    mmtts_status status = load_config(config_path, overrides, &cfg);
    if (status != MMTTS_OK) return report(status);
    char* table = nullptr;
    status = mmtts_evaluate(cfg.ptr, manifest_path.c_str(), references_path.c_str(),
                            embedding_cmd.c_str(), transcript_cmd.c_str(), out_path.c_str(),
                            &table);
    if (status == MMTTS_OK) print_owned(table);
    return report(status);
  }

  return 1;
}
