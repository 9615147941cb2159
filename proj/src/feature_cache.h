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

#ifndef MMTTS_SRC_FEATURE_CACHE_H_
#define MMTTS_SRC_FEATURE_CACHE_H_

#include <string>
#include <vector>

#include "acoustic_features.h"
#include "manifest.h"
#include "text_frontend.h"

namespace mmtts {

struct FeatureCacheEntry {
  std::string key;  // stable per-utterance id derived from the audio path
  MelSpectrogram mel;
  PitchTrack pitch;
  EnergyTrack energy;
  std::vector<int> token_ids;
  int speaker_id = -1;
  int accent_id = -1;
  int language_id = -1;
};

std::string cache_key_for_path(const std::string& audio_path);

struct CacheReport {
  int computed = 0;
  int reused = 0;
  std::vector<std::string> failures;  // "path: reason" per failed record
};

// Extracts mel/F0/energy/token features for every record and writes one
// binary bundle per utterance plus `index.json` under `cache_dir`. Entries
// whose file already exists under the same config hash are reused, so the
// call is idempotent. Per-record failures are collected, not fatal.
CacheReport cache_features(const DatasetManifest& manifest, const PhonemeInventory& inventory,
                           const FeatureConfig& config, const std::string& cache_dir);

bool cache_has_entry(const std::string& cache_dir, const std::string& key);

FeatureCacheEntry load_cache_entry(const std::string& cache_dir, const std::string& key);

// All keys listed in index.json, in manifest (insertion) order.
std::vector<std::string> cache_index_keys(const std::string& cache_dir,
                                          const FeatureConfig& config);

// Per-speaker F0 statistics plus corpus-level energy statistics, both fixed
// at prepare time and carried into checkpoints.
struct CorpusStats {
  std::vector<SpeakerPitchStats> speakers;
  double energy_mean = 0.0;
  double energy_std = 1.0;
};

void save_corpus_stats(const CorpusStats& stats, const std::string& path);
CorpusStats load_corpus_stats(const std::string& path);

}  // namespace mmtts

#endif  // MMTTS_SRC_FEATURE_CACHE_H_
