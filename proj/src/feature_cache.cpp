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

#include "feature_cache.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "binio.h"
#include "util.h"
#include "wav.h"

namespace mmtts {

namespace fs = std::filesystem;
using nlohmann::json;

std::string cache_key_for_path(const std::string& audio_path) {
  const std::string stem = fs::path(audio_path).stem().string();
  std::string clean;
  for (char c : stem) {
    clean += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  // The hash disambiguates equal stems from different directories.
  return clean + "_" + hex64(fnv1a64(audio_path));
}

namespace {

std::string entry_path(const std::string& cache_dir, const std::string& key) {
  return (fs::path(cache_dir) / (key + ".mmtb")).string();
}

std::string index_path(const std::string& cache_dir) {
  return (fs::path(cache_dir) / "index.json").string();
}

void write_entry(const std::string& path, const FeatureCacheEntry& entry,
                 const FeatureConfig& config) {
  TensorBundle bundle;
  bundle.put_bytes("key", entry.key);
  bundle.put_f32("mel",
                 {static_cast<uint32_t>(entry.mel.n_mels), static_cast<uint32_t>(entry.mel.frames)},
                 entry.mel.values);
  bundle.put_f32("f0_hz", {static_cast<uint32_t>(entry.pitch.f0_hz.size())}, entry.pitch.f0_hz);
  bundle.put_i32("voiced",
                 std::vector<int32_t>(entry.pitch.voiced.begin(), entry.pitch.voiced.end()));
  bundle.put_f32("energy", {static_cast<uint32_t>(entry.energy.values.size())},
                 entry.energy.values);
  bundle.put_i32("token_ids", entry.token_ids);
  bundle.put_i32("labels", {entry.speaker_id, entry.accent_id, entry.language_id});
  bundle.put_i32("mel_meta", {entry.mel.hop, entry.mel.sample_rate});
  (void)config;
  bundle.save(path);
}

FeatureCacheEntry read_entry(const std::string& path) {
  TensorBundle bundle = TensorBundle::load(path);
  FeatureCacheEntry entry;
  entry.key = bundle.get_bytes("key");
  const std::vector<uint32_t>& mel_dims = bundle.dims("mel");
  entry.mel.n_mels = static_cast<int>(mel_dims[0]);
  entry.mel.frames = static_cast<int>(mel_dims[1]);
  entry.mel.values = bundle.get_f32("mel");
  entry.pitch.f0_hz = bundle.get_f32("f0_hz");
  for (int32_t v : bundle.get_i32("voiced")) {
    entry.pitch.voiced.push_back(static_cast<uint8_t>(v));
  }
  entry.energy.values = bundle.get_f32("energy");
  entry.token_ids = bundle.get_i32("token_ids");
  const std::vector<int32_t> labels = bundle.get_i32("labels");
  entry.speaker_id = labels[0];
  entry.accent_id = labels[1];
  entry.language_id = labels[2];
  const std::vector<int32_t> mel_meta = bundle.get_i32("mel_meta");
  entry.mel.hop = mel_meta[0];
  entry.mel.sample_rate = mel_meta[1];
  return entry;
}

}  // namespace

CacheReport cache_features(const DatasetManifest& manifest, const PhonemeInventory& inventory,
                           const FeatureConfig& config, const std::string& cache_dir) {
  fs::create_directories(cache_dir);
  CacheReport report;

  // Reuse is keyed on the feature-config hash: a changed config invalidates
  // every entry even though the per-utterance files still exist.
  const std::string config_hash = hex64(config.hash());
  json index;
  const std::string idx_path = index_path(cache_dir);
  bool index_valid = false;
  if (fs::exists(idx_path)) {
    try {
      index = json::parse(read_text_file(idx_path));
      index_valid = index.value("config_hash", "") == config_hash;
    } catch (...) {
      index_valid = false;
    }
  }
  if (!index_valid) {
    index = json{{"config_hash", config_hash}, {"entries", json::array()}};
  }
  std::vector<std::string> known;
  for (const auto& item : index["entries"]) known.push_back(item.get<std::string>());

  json entries = json::array();
  for (const UtteranceRecord& record : manifest.records) {
    const std::string key = cache_key_for_path(record.audio_path);
    const std::string path = entry_path(cache_dir, key);
    const bool reusable = index_valid && fs::exists(path) &&
                          std::find(known.begin(), known.end(), key) != known.end();
    if (reusable) {
      entries.push_back(key);
      ++report.reused;
      continue;
    }
    try {
      const Waveform wav = read_wav(record.audio_path);
      FeatureCacheEntry entry;
      entry.key = key;
      entry.mel = mel_spectrogram(wav, config);
      entry.pitch = extract_f0(wav, config);
      entry.energy = frame_energy(entry.mel, config);
      entry.token_ids = tokenize_ipa(record.ipa_text, inventory).ids;
      entry.speaker_id = record.speaker_id;
      entry.accent_id = record.accent_id;
      entry.language_id = record.language_id;
      write_entry(path, entry, config);
      entries.push_back(key);
      ++report.computed;
    } catch (const Error& e) {
      report.failures.push_back(record.audio_path + ": " + e.what());
    }
  }
  index["entries"] = entries;
  write_text_file(idx_path, index.dump(2) + "\n");
  return report;
}

bool cache_has_entry(const std::string& cache_dir, const std::string& key) {
  return fs::exists(entry_path(cache_dir, key));
}

FeatureCacheEntry load_cache_entry(const std::string& cache_dir, const std::string& key) {
  const std::string path = entry_path(cache_dir, key);
  if (!fs::exists(path)) {
    fail(StatusCode::kNotFound, "cache entry not found: ", path);
  }
  return read_entry(path);
}

std::vector<std::string> cache_index_keys(const std::string& cache_dir,
                                          const FeatureConfig& config) {
  const std::string idx_path = index_path(cache_dir);
  if (!fs::exists(idx_path)) {
    fail(StatusCode::kNotFound, "cache index not found: ", idx_path);
  }
  json index;
  try {
    index = json::parse(read_text_file(idx_path));
  } catch (const json::exception& e) {
    fail(StatusCode::kParseError, idx_path, ": ", e.what());
  }
  if (index.value("config_hash", "") != hex64(config.hash())) {
    fail(StatusCode::kInvalidArgument, idx_path,
         ": cache was built with a different feature config; re-run prepare");
  }
  std::vector<std::string> keys;
  for (const auto& item : index["entries"]) keys.push_back(item.get<std::string>());
  return keys;
}

void save_corpus_stats(const CorpusStats& stats, const std::string& path) {
  json speakers = json::array();
  for (const SpeakerPitchStats& s : stats.speakers) {
    speakers.push_back(json{{"speaker_id", s.speaker_id},
                            {"mean_hz", s.mean_hz},
                            {"std_hz", s.std_hz},
                            {"n_voiced", s.n_voiced_frames}});
  }
  const json doc{{"speakers", speakers},
                 {"energy", json{{"mean", stats.energy_mean}, {"std", stats.energy_std}}}};
  write_text_file(path, doc.dump(2) + "\n");
}

CorpusStats load_corpus_stats(const std::string& path) {
  if (!fs::exists(path)) {
    fail(StatusCode::kNotFound, "corpus stats not found: ", path);
  }
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(StatusCode::kParseError, path, ": ", e.what());
  }
  CorpusStats stats;
  for (const auto& item : doc.at("speakers")) {
    SpeakerPitchStats s;
    s.speaker_id = item.at("speaker_id").get<int>();
    s.mean_hz = item.at("mean_hz").get<double>();
    s.std_hz = item.at("std_hz").get<double>();
    s.n_voiced_frames = item.at("n_voiced").get<int64_t>();
    stats.speakers.push_back(s);
  }
  stats.energy_mean = doc.at("energy").at("mean").get<double>();
  stats.energy_std = doc.at("energy").at("std").get<double>();
  return stats;
}

}  // namespace mmtts
