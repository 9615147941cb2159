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

#ifndef MMTTS_SRC_ACOUSTIC_FEATURES_H_
#define MMTTS_SRC_ACOUSTIC_FEATURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "wav.h"

namespace mmtts {

// Framing, filterbank and pitch extraction parameters. Defaults are the
// conventional 16 kHz TTS setup. `energy_domain` selects whether per-frame
// energy averages the stored log-mel values ("log") or linear filterbank
// outputs ("linear").
struct FeatureConfig {
  int sample_rate = 16000;
  int win = 1024;
  int hop = 256;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double f0_min = 50.0;
  double f0_max = 600.0;
  double voicing_threshold = 0.25;
  double log_floor = 1e-5;
  std::string energy_domain = "log";
  double f0_std_floor = 1.0;

  // Stable content hash; cache entries and checkpoints are keyed on it.
  uint64_t hash() const;
  // Number of frames for a waveform of `num_samples` samples (no padding).
  int frame_count(size_t num_samples) const;
};

// Log-mel magnitudes, row-major [n_mels x frames].
struct MelSpectrogram {
  int n_mels = 0;
  int frames = 0;
  int hop = 0;
  int sample_rate = 0;
  std::vector<float> values;  // values[c * frames + f]

  float at(int channel, int frame) const { return values[channel * frames + frame]; }
};

struct PitchTrack {
  std::vector<float> f0_hz;        // 0 where unvoiced
  std::vector<uint8_t> voiced;     // 1 voiced, 0 unvoiced
  int num_voiced() const;
};

struct EnergyTrack {
  std::vector<float> values;
};

struct SpeakerPitchStats {
  int speaker_id = -1;
  double mean_hz = 0.0;
  double std_hz = 0.0;
  int64_t n_voiced_frames = 0;
};

MelSpectrogram mel_spectrogram(const Waveform& wav, const FeatureConfig& config);

// Per-frame mean over mel channels, in the configured domain.
EnergyTrack frame_energy(const MelSpectrogram& mel, const FeatureConfig& config);

// YIN-style normalized-difference pitch tracker; frame centers coincide with
// mel frames. Silence comes back fully unvoiced rather than as an error.
PitchTrack extract_f0(const Waveform& wav, const FeatureConfig& config);

// Population statistics (divide by n) over the union of a speaker's voiced
// frames; std is floored at config.f0_std_floor. A speaker with zero voiced
// frames is an error naming the speaker.
std::vector<SpeakerPitchStats> speaker_f0_stats(
    const std::vector<std::pair<int, const PitchTrack*>>& tracks,
    const FeatureConfig& config);

// Voiced frames map to (f0 - mean) / std, unvoiced frames to 0.
std::vector<float> standardize_f0(const PitchTrack& track, const SpeakerPitchStats& stats,
                                  const FeatureConfig& config);

// Exact inverse of standardize_f0 on voiced frames; any speaker's stats may
// be used, which is what re-imposes identity at transfer time.
std::vector<float> destandardize_f0(const std::vector<float>& f0_norm,
                                    const std::vector<uint8_t>& voiced,
                                    const SpeakerPitchStats& stats);

// Mel filter center frequency of a given bin (HTK mel scale); exposed so
// tests can locate the bin containing a known tone.
double mel_bin_center_hz(const FeatureConfig& config, int bin);

}  // namespace mmtts

#endif  // MMTTS_SRC_ACOUSTIC_FEATURES_H_
