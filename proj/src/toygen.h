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

#ifndef MMTTS_SRC_TOYGEN_H_
#define MMTTS_SRC_TOYGEN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "manifest.h"
#include "wav.h"

namespace mmtts {

// A fully synthetic corpus small enough for CPU smoke training: vowel
// sequences rendered as impulse trains through formant resonators. Speakers
// differ by fundamental frequency; the two "accents" differ systematically in
// vowel duration and formant placement, so accent transfer is observable.
struct ToyCorpusOptions {
  int n_speakers = 4;
  int n_utterances = 32;
  int sample_rate = 16000;
  uint64_t seed = 7;
};

struct ToyCorpus {
  std::string manifest_path;
  std::string config_path;
  DatasetManifest manifest;
};

// Writes wavs, manifest.txt, and config.cfg under out_dir and returns the
// parsed manifest. Deterministic for a fixed seed.
ToyCorpus make_toy_corpus(const std::string& out_dir, const ToyCorpusOptions& options);

// One synthetic vowel: impulse train at f0_hz through two formant
// resonators. Exposed for DSP tests that need known-F0, known-formant audio.
Waveform synth_vowel(double f0_hz, double formant1_hz, double formant2_hz, double seconds,
                     int sample_rate);

}  // namespace mmtts

#endif  // MMTTS_SRC_TOYGEN_H_
