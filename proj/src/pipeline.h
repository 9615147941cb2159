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

#ifndef MMTTS_SRC_PIPELINE_H_
#define MMTTS_SRC_PIPELINE_H_

#include <cstdint>
#include <string>

#include "config.h"
#include "model.h"

namespace mmtts {

// End-to-end command implementations shared by the C API and the tests.
// Every function throws Error on failure and returns a human summary.

// Validates the dataset, builds the shared phoneme inventory, extracts and
// caches features, and freezes per-speaker F0 and corpus energy statistics.
// Idempotent: cached entries are reused on rerun.
std::string prepare_corpus(const ToolkitConfig& config, const std::string& manifest_path,
                           const std::string& cache_dir);

// Applies the six augmentation strata and returns the merged manifest path.
std::string augment_corpus(const ToolkitConfig& config, const std::string& manifest_path,
                           const std::string& out_dir, uint64_t seed, std::string* summary);

// Trains on every cached utterance and writes the final checkpoint plus a
// `<checkpoint>.trace.json` loss trace.
std::string train_from_cache(const ToolkitConfig& config, const std::string& cache_dir,
                             const std::string& checkpoint_path, TrainLogger logger);

// Loads a checkpoint and renders `ipa_text` as `speaker` in `accent`,
// writing a mel bundle (mel/durations/f0/energy/meta) to out_path.
std::string synthesize_to_file(const std::string& checkpoint_path, const std::string& ipa_text,
                               const std::string& speaker, const std::string& accent,
                               const std::string& mode, double sigma, uint64_t seed,
                               const std::string& out_path);

// Scores a synthesized set against reference embeddings built from the real
// corpus; writes the JSON report and returns the human-readable table.
// Empty command strings select the built-in hermetic providers.
std::string evaluate_to_report(const ToolkitConfig& config, const std::string& synth_manifest_path,
                               const std::string& reference_manifest_path,
                               const std::string& embedding_cmd, const std::string& transcript_cmd,
                               const std::string& report_path);

}  // namespace mmtts

#endif  // MMTTS_SRC_PIPELINE_H_
