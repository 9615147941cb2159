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

#include "manifest.h"

#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_map>

#include "util.h"
#include "wav.h"

namespace mmtts {

namespace {

int intern(const std::string& name, std::vector<std::string>* names,
           std::unordered_map<std::string, int>* index) {
  auto it = index->find(name);
  if (it != index->end()) return it->second;
  const int id = static_cast<int>(names->size());
  names->push_back(name);
  index->emplace(name, id);
  return id;
}

int lookup(const std::vector<std::string>& names, const std::string& name) {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

int DatasetManifest::speaker_id(const std::string& name) const {
  return lookup(speaker_names, name);
}

int DatasetManifest::accent_id(const std::string& name) const {
  return lookup(accent_names, name);
}

DatasetManifest parse_manifest_text(const std::string& text, const std::string& origin,
                                    int expected_sample_rate) {
  DatasetManifest manifest;
  manifest.sample_rate_hz = expected_sample_rate;
  std::unordered_map<std::string, int> speaker_index;
  std::unordered_map<std::string, int> accent_index;
  std::unordered_map<std::string, int> language_index;
  std::unordered_map<std::string, int> seen_paths;  // path -> line number

  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;

    const std::vector<std::string> fields = split(stripped, '|');
    if (fields.size() != 5) {
      fail(StatusCode::kParseError, origin, ":", line_number, ": expected 5 '|'-separated fields, got ",
           fields.size());
    }
    UtteranceRecord record;
    record.audio_path = trim(fields[0]);
    record.ipa_text = trim(fields[1]);
    const std::string speaker = trim(fields[2]);
    const std::string accent = trim(fields[3]);
    const std::string language = trim(fields[4]);
    if (record.audio_path.empty()) {
      fail(StatusCode::kParseError, origin, ":", line_number, ": empty audio path");
    }
    if (record.ipa_text.empty()) {
      fail(StatusCode::kParseError, origin, ":", line_number, ": empty ipa text");
    }
    if (speaker.empty() || accent.empty() || language.empty()) {
      fail(StatusCode::kParseError, origin, ":", line_number, ": empty label field");
    }
    auto dup = seen_paths.find(record.audio_path);
    if (dup != seen_paths.end()) {
      fail(StatusCode::kParseError, origin, ":", line_number, ": duplicate audio path '",
           record.audio_path, "' (first at line ", dup->second, ")");
    }
    seen_paths.emplace(record.audio_path, line_number);

    record.speaker_id = intern(speaker, &manifest.speaker_names, &speaker_index);
    record.accent_id = intern(accent, &manifest.accent_names, &accent_index);
    record.language_id = intern(language, &manifest.language_names, &language_index);
    record.line_number = line_number;
    manifest.records.push_back(std::move(record));
  }
  if (manifest.records.empty()) {
    fail(StatusCode::kParseError, origin, ": manifest has no records");
  }
  return manifest;
}

DatasetManifest parse_manifest(const std::string& path, int expected_sample_rate) {
  DatasetManifest manifest = parse_manifest_text(read_text_file(path), path, expected_sample_rate);
  // Relative audio paths are relative to the manifest, not the process cwd,
  // so a corpus directory can be moved or mounted anywhere as one unit.
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  if (!base.empty()) {
    for (UtteranceRecord& record : manifest.records) {
      const std::filesystem::path p(record.audio_path);
      if (p.is_relative()) record.audio_path = (base / p).lexically_normal().string();
    }
  }
  return manifest;
}

std::string format_manifest(const DatasetManifest& manifest,
                            const std::vector<std::string>& header_comments) {
  std::ostringstream out;
  for (const std::string& comment : header_comments) {
    out << "# " << comment << "\n";
  }
  for (const UtteranceRecord& record : manifest.records) {
    out << record.audio_path << "|" << record.ipa_text << "|"
        << manifest.speaker_names[record.speaker_id] << "|"
        << manifest.accent_names[record.accent_id] << "|"
        << manifest.language_names[record.language_id] << "\n";
  }
  return out.str();
}

ValidationReport validate_dataset(const DatasetManifest& manifest) {
  ValidationReport report;
  report.n_records = static_cast<int>(manifest.records.size());

  std::map<int, std::set<int>> speakers_by_accent;
  for (const UtteranceRecord& record : manifest.records) {
    speakers_by_accent[record.accent_id].insert(record.speaker_id);
    if (!std::filesystem::exists(record.audio_path)) {
      report.missing_files.push_back(record.audio_path);
      continue;
    }
    int rate = 0;
    try {
      rate = read_wav_sample_rate(record.audio_path);
    } catch (const Error&) {
      report.sample_rate_mismatches.push_back(record.audio_path + ": unreadable wav header");
      continue;
    }
    if (rate != manifest.sample_rate_hz) {
      report.sample_rate_mismatches.push_back(record.audio_path + ": " + std::to_string(rate) +
                                              " Hz, expected " +
                                              std::to_string(manifest.sample_rate_hz));
    }
  }
  for (const auto& [accent, speakers] : speakers_by_accent) {
    report.speakers_per_accent[accent] = static_cast<int>(speakers.size());
    if (speakers.size() == 1) report.low_resource_accents.push_back(accent);
  }
  return report;
}

std::string ValidationReport::summary(const DatasetManifest& manifest) const {
  std::ostringstream out;
  out << n_records << " records, " << manifest.n_speakers() << " speakers, "
      << manifest.n_accents() << " accents, " << manifest.n_languages() << " languages\n";
  for (const auto& [accent, count] : speakers_per_accent) {
    out << "  accent '" << manifest.accent_names[accent] << "': " << count << " speaker"
        << (count == 1 ? "" : "s");
    if (count == 1) out << " (low-resource: augmentation recommended)";
    out << "\n";
  }
  if (!missing_files.empty()) {
    out << "  missing files: " << missing_files.size() << "\n";
    for (const std::string& path : missing_files) out << "    " << path << "\n";
  }
  if (!sample_rate_mismatches.empty()) {
    out << "  sample-rate problems: " << sample_rate_mismatches.size() << "\n";
    for (const std::string& msg : sample_rate_mismatches) out << "    " << msg << "\n";
  }
  return out.str();
}

}  // namespace mmtts
