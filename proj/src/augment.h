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

#ifndef MMTTS_SRC_AUGMENT_H_
#define MMTTS_SRC_AUGMENT_H_

#include <string>
#include <vector>

#include "acoustic_features.h"
#include "manifest.h"
#include "wav.h"

namespace mmtts {

enum class AugmentKind {
  kFormantDown,
  kFormantUp,
  kF0Down,
  kF0Up,
  kFaster,
  kSlower,
};

struct AugmentSpec {
  AugmentKind kind;
  double factor_lo;
  double factor_hi;
};

const char* augment_kind_name(AugmentKind kind);

// The six transform strata: formant x[0.875,1.0] / x[1.0,1.25],
// F0 x[0.9,1.0] / x[1.0,1.1], duration x[0.9,1.0] / x[1.0,1.1].
std::vector<AugmentSpec> default_augment_specs();

// Pitch-synchronous overlap-add pitch shift: grains of two local periods are
// re-spaced by 1/factor, leaving length and spectral envelope approximately
// unchanged. A fully unvoiced input passes through unchanged and sets
// *unvoiced_passthrough.
Waveform scale_f0(const Waveform& wav, double factor, const FeatureConfig& config,
                  bool* unvoiced_passthrough = nullptr);

// Waveform-similarity overlap-add time stretch; `rate` multiplies duration
// and pitch is preserved.
Waveform scale_duration(const Waveform& wav, double rate, const FeatureConfig& config);

// Warps the cepstrally smoothed spectral envelope along frequency by
// `factor` per frame while leaving the excitation residual (and hence F0)
// alone.
Waveform scale_formants(const Waveform& wav, double factor, const FeatureConfig& config);

Waveform apply_augment(const Waveform& wav, AugmentKind kind, double factor,
                       const FeatureConfig& config, bool* unvoiced_passthrough = nullptr);

// speaker_id + t * n_speakers; t is the 1-based transform stratum (0 is
// reserved for originals).
int relabel_speaker(int speaker_id, int t, int n_speakers);

struct AugmentReport {
  int written = 0;
  std::vector<std::string> failures;  // "path: reason", run continues
  std::vector<std::string> warnings;
};

// Writes one transformed copy per (record, spec) into out_dir plus a merged
// manifest (originals first, then stratum t=1..tau in source order, which
// makes first-appearance id assignment reproduce s + t*N exactly). Factors
// are sampled per utterance from the spec range, deterministically in seed.
// Returns the merged manifest, already parsed.
DatasetManifest augment_dataset(const DatasetManifest& manifest,
                                const std::vector<AugmentSpec>& specs, const std::string& out_dir,
                                const FeatureConfig& config, uint64_t seed,
                                AugmentReport* report = nullptr);

}  // namespace mmtts

#endif  // MMTTS_SRC_AUGMENT_H_
