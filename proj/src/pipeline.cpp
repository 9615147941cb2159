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

#include "pipeline.h"

#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "augment.h"
#include "binio.h"
#include "evalmetrics.h"
#include "feature_cache.h"
#include "manifest.h"
#include "text_frontend.h"
#include "util.h"

namespace mmtts {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kInventoryFile = "inventory.txt";
constexpr const char* kStatsFile = "stats.json";
constexpr const char* kNamesFile = "names.json";

void save_names(const std::string& cache_dir, const DatasetManifest& manifest) {
  json j;
  j["speakers"] = manifest.speaker_names;
  j["accents"] = manifest.accent_names;
  j["languages"] = manifest.language_names;
  j["sample_rate"] = manifest.sample_rate_hz;
  write_text_file((fs::path(cache_dir) / kNamesFile).string(), j.dump(2));
}

json load_names(const std::string& cache_dir) {
  const std::string path = (fs::path(cache_dir) / kNamesFile).string();
  if (!fs::exists(path)) {
    fail(StatusCode::kNotFound, path, " missing; run prepare first");
  }
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(StatusCode::kParseError, path, ": ", e.what());
  }
}

}  // namespace

std::string prepare_corpus(const ToolkitConfig& config, const std::string& manifest_path,
                           const std::string& cache_dir) {
  config.validate();
  const DatasetManifest manifest = parse_manifest(manifest_path, config.features.sample_rate);

  const ValidationReport validation = validate_dataset(manifest);
  if (!validation.ok()) {
    fail(StatusCode::kInvalidArgument, "dataset validation failed:\n",
         validation.summary(manifest));
  }

  const PhonemeInventory inventory = PhonemeInventory::build({&manifest});
  // Tokenize everything up front so coverage errors surface at prepare time.
  for (const UtteranceRecord& record : manifest.records) {
    tokenize_ipa(record.ipa_text, inventory);
  }

  fs::create_directories(cache_dir);
  inventory.save((fs::path(cache_dir) / kInventoryFile).string());
  save_names(cache_dir, manifest);

  const CacheReport cache = cache_features(manifest, inventory, config.features, cache_dir);
  if (!cache.failures.empty()) {
    std::ostringstream os;
    os << cache.failures.size() << " of " << manifest.records.size()
       << " records failed feature extraction:";
    for (const std::string& f : cache.failures) os << "\n  " << f;
    fail(StatusCode::kInvalidArgument, os.str());
  }

  // Pooled statistics over the cached features, frozen here so training and
  // synthesis standardize with the exact same numbers.
  CorpusStats stats;
  {
    std::vector<FeatureCacheEntry> entries;
    std::vector<std::pair<int, const PitchTrack*>> tracks;
    for (const std::string& key : cache_index_keys(cache_dir, config.features)) {
      entries.push_back(load_cache_entry(cache_dir, key));
    }
    for (const FeatureCacheEntry& e : entries) {
      tracks.emplace_back(e.speaker_id, &e.pitch);
    }
    stats.speakers = speaker_f0_stats(tracks, config.features);
    double sum = 0.0, sq = 0.0;
    int64_t n = 0;
    for (const FeatureCacheEntry& e : entries) {
      for (float v : e.energy.values) {
        sum += v;
        sq += static_cast<double>(v) * v;
        ++n;
      }
    }
    if (n > 0) {
      stats.energy_mean = sum / n;
      const double var = sq / n - stats.energy_mean * stats.energy_mean;
      stats.energy_std = var > 0 ? std::sqrt(var) : 1.0;
    }
  }
  save_corpus_stats(stats, (fs::path(cache_dir) / kStatsFile).string());

  std::ostringstream os;
  os << "prepared " << manifest.records.size() << " utterances (" << cache.computed << " new, "
     << cache.reused << " reused)\n"
     << "inventory: " << inventory.size() << " symbols\n"
     << "speakers: " << manifest.n_speakers() << ", accents: " << manifest.n_accents()
     << ", languages: " << manifest.n_languages() << "\n"
     << validation.summary(manifest);
  return os.str();
}

std::string augment_corpus(const ToolkitConfig& config, const std::string& manifest_path,
                           const std::string& out_dir, uint64_t seed, std::string* summary) {
  config.validate();
  const DatasetManifest manifest = parse_manifest(manifest_path, config.features.sample_rate);
  AugmentReport report;
  const DatasetManifest merged =
      augment_dataset(manifest, default_augment_specs(), out_dir, config.features, seed, &report);
  if (!report.failures.empty()) {
    std::ostringstream os;
    os << report.failures.size() << " augmentation failure(s):";
    for (const std::string& f : report.failures) os << "\n  " << f;
    fail(StatusCode::kInvalidArgument, os.str());
  }
  if (summary) {
    std::ostringstream os;
    os << "wrote " << report.written << " augmented files across " << default_augment_specs().size()
       << " strata\n"
       << "merged manifest: " << merged.records.size() << " records, " << merged.n_speakers()
       << " speaker ids";
    for (const std::string& wmsg : report.warnings) os << "\nwarning: " << wmsg;
    *summary = os.str();
  }
  return (fs::path(out_dir) / "manifest.txt").string();
}

std::string train_from_cache(const ToolkitConfig& config, const std::string& cache_dir,
                             const std::string& checkpoint_path, TrainLogger logger) {
  config.validate();
  const json names = load_names(cache_dir);
  const PhonemeInventory inventory =
      PhonemeInventory::load_file((fs::path(cache_dir) / kInventoryFile).string());
  const CorpusStats stats = load_corpus_stats((fs::path(cache_dir) / kStatsFile).string());

  std::vector<FeatureCacheEntry> data;
  for (const std::string& key : cache_index_keys(cache_dir, config.features)) {
    data.push_back(load_cache_entry(cache_dir, key));
  }
  if (data.empty()) fail(StatusCode::kNotFound, "feature cache at ", cache_dir, " is empty");

  ModelState state = init_model(config, inventory, names.at("speakers"), names.at("accents"),
                                names.at("languages"), stats);

  const fs::path ckpt(checkpoint_path);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  const TrainSummary summary = train_model(&state, data, config.training.steps,
                                           ckpt.has_parent_path() ? ckpt.parent_path().string()
                                                                  : std::string("."),
                                           std::move(logger));
  save_checkpoint(state, checkpoint_path);

  json trace;
  trace["loss"] = summary.loss_trace;
  trace["initial_terms"] = summary.initial_terms;
  trace["final_terms"] = summary.final_terms;
  trace["final_epoch_mean_r_fro"] = summary.final_epoch_mean_r_fro;
  trace["steps"] = summary.steps;
  write_text_file(checkpoint_path + ".trace.json", trace.dump(2));

  std::ostringstream os;
  os << "trained " << summary.steps << " steps on " << data.size() << " utterances\n"
     << "loss " << summary.initial_total << " -> " << summary.final_total << "\n"
     << "final-epoch mean |R_AS| Frobenius norm: " << summary.final_epoch_mean_r_fro << "\n"
     << "checkpoint: " << checkpoint_path;
  return os.str();
}

std::string synthesize_to_file(const std::string& checkpoint_path, const std::string& ipa_text,
                               const std::string& speaker, const std::string& accent,
                               const std::string& mode, double sigma, uint64_t seed,
                               const std::string& out_path) {
  const ModelState state = load_checkpoint(checkpoint_path);

  auto index_of = [](const std::vector<std::string>& names, const std::string& name,
                     const char* what) {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    std::ostringstream os;
    os << "unknown " << what << " '" << name << "'; known:";
    for (const std::string& n : names) os << " " << n;
    fail(StatusCode::kNotFound, os.str());
  };

  SynthesisRequest request;
  request.ipa_text = ipa_text;
  request.speaker_id = index_of(state.speaker_names, speaker, "speaker");
  request.accent_id = index_of(state.accent_names, accent, "accent");
  request.mode = mode;
  request.sigma = sigma;
  request.seed = seed;
  const SynthesisResult result = synthesize(state, request);

  TensorBundle bundle;
  bundle.put_f32("mel",
                 {static_cast<uint32_t>(result.mel.n_mels), static_cast<uint32_t>(result.mel.frames)},
                 result.mel.values);
  bundle.put_i32("durations", std::vector<int32_t>(result.durations.begin(),
                                                   result.durations.end()));
  bundle.put_i32("token_ids", std::vector<int32_t>(result.token_ids.begin(),
                                                   result.token_ids.end()));
  if (!result.f0_hz.empty()) {
    bundle.put_f32("f0_hz", {static_cast<uint32_t>(result.f0_hz.size())},
                   std::vector<float>(result.f0_hz.begin(), result.f0_hz.end()));
  }
  if (!result.energy.empty()) {
    bundle.put_f32("energy", {static_cast<uint32_t>(result.energy.size())},
                   std::vector<float>(result.energy.begin(), result.energy.end()));
  }
  json meta;
  meta["text"] = ipa_text;
  meta["speaker"] = speaker;
  meta["accent"] = accent;
  meta["mode"] = mode.empty() ? state.config.mode : mode;
  meta["sigma"] = sigma;
  meta["seed"] = seed;
  meta["hop"] = result.mel.hop;
  meta["sample_rate"] = result.mel.sample_rate;
  bundle.put_bytes("meta", meta.dump(2));

  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  bundle.save(out_path);

  std::ostringstream os;
  os << "synthesized " << result.mel.frames << " frames (" << result.token_ids.size()
     << " tokens) as " << speaker << "/" << accent << " -> " << out_path;
  return os.str();
}

std::string evaluate_to_report(const ToolkitConfig& config, const std::string& synth_manifest_path,
                               const std::string& reference_manifest_path,
                               const std::string& embedding_cmd, const std::string& transcript_cmd,
                               const std::string& report_path) {
  config.validate();
  std::vector<EvalItem> items = parse_eval_items(read_text_file(synth_manifest_path));
  if (items.empty()) {
    fail(StatusCode::kInvalidArgument, synth_manifest_path, ": no evaluable items");
  }
  const fs::path base = fs::path(synth_manifest_path).parent_path();
  for (EvalItem& item : items) {
    if (fs::path(item.path).is_relative() && !base.empty()) {
      item.path = (base / item.path).lexically_normal().string();
    }
  }

  std::unique_ptr<EmbeddingProvider> embedder =
      embedding_cmd.empty() ? make_mel_stats_embedding(config.features)
                            : make_command_embedding(embedding_cmd, "command");
  std::unique_ptr<TranscriptProvider> transcriber =
      transcript_cmd.empty() ? make_echo_transcript()
                             : make_command_transcript(transcript_cmd, "command");

  const DatasetManifest references =
      parse_manifest(reference_manifest_path, config.features.sample_rate);
  const std::map<std::string, EmbeddingVector> ref_embeddings =
      reference_embeddings(references, *embedder);
  if (ref_embeddings.empty()) {
    fail(StatusCode::kInvalidArgument, "no reference embeddings could be computed from ",
         reference_manifest_path);
  }

  const TransferReport report = evaluate_transfer(items, ref_embeddings, *embedder, *transcriber);
  const fs::path out(report_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text_file(report_path, report.to_json());
  return report.to_table();
}

}  // namespace mmtts
