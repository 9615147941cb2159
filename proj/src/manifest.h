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

#ifndef MMTTS_SRC_MANIFEST_H_
#define MMTTS_SRC_MANIFEST_H_

#include <map>
#include <string>
#include <vector>

namespace mmtts {

struct UtteranceRecord {
  std::string audio_path;
  std::string ipa_text;
  int speaker_id = -1;
  int accent_id = -1;
  int language_id = -1;
  int line_number = 0;  // 1-based line in the manifest file, for messages
};

// Manifest lines are `audio_path|ipa_text|speaker|accent|language` with `#`
// comments. The three label fields are arbitrary strings; dense ids are
// assigned in first-appearance order, so ids are deterministic without any
// sorting assumption.
struct DatasetManifest {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> speaker_names;   // index = speaker_id
  std::vector<std::string> accent_names;    // index = accent_id
  std::vector<std::string> language_names;  // index = language_id
  int sample_rate_hz = 0;                   // expected rate; checked by validate

  int n_speakers() const { return static_cast<int>(speaker_names.size()); }
  int n_accents() const { return static_cast<int>(accent_names.size()); }
  int n_languages() const { return static_cast<int>(language_names.size()); }

  int speaker_id(const std::string& name) const;  // -1 when unknown
  int accent_id(const std::string& name) const;
};

DatasetManifest parse_manifest(const std::string& path, int expected_sample_rate = 16000);
DatasetManifest parse_manifest_text(const std::string& text, const std::string& origin,
                                    int expected_sample_rate = 16000);

// Serializes back to the 5-field format; `header_comments` lines are emitted
// first, each prefixed with '# '.
std::string format_manifest(const DatasetManifest& manifest,
                            const std::vector<std::string>& header_comments = {});

struct ValidationReport {
  std::vector<std::string> missing_files;
  std::vector<std::string> sample_rate_mismatches;
  std::map<int, int> speakers_per_accent;   // accent_id -> distinct speakers
  std::vector<int> low_resource_accents;    // accents with exactly 1 speaker
  int n_records = 0;

  bool ok() const { return missing_files.empty() && sample_rate_mismatches.empty(); }
  std::string summary(const DatasetManifest& manifest) const;
};

// Report-only: never mutates the manifest or the filesystem.
ValidationReport validate_dataset(const DatasetManifest& manifest);

}  // namespace mmtts

#endif  // MMTTS_SRC_MANIFEST_H_
