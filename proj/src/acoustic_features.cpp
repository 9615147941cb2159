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

#include "acoustic_features.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dsp.h"
#include "util.h"

namespace mmtts {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filterbank over the magnitude spectrum (HTK mel scale).
// Returns n_mels filters over n_bins = fft_size/2 + 1 spectrum bins.
std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& config,
                                                size_t fft_size) {
  size_t n_bins = fft_size / 2 + 1;
  double mel_lo = hz_to_mel(config.fmin);
  double mel_hi = hz_to_mel(config.fmax);
  std::vector<double> edges(config.n_mels + 2);
  for (int m = 0; m < config.n_mels + 2; ++m)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (config.n_mels + 1));
  std::vector<std::vector<double>> filters(config.n_mels,
                                           std::vector<double>(n_bins, 0.0));
  double bin_hz = static_cast<double>(config.sample_rate) / static_cast<double>(fft_size);
  for (int m = 0; m < config.n_mels; ++m) {
    double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (size_t b = 0; b < n_bins; ++b) {
      double f = bin_hz * static_cast<double>(b);
      if (f <= lo || f >= hi) continue;
      filters[m][b] = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
    }
  }
  return filters;
}

}  // namespace

uint64_t FeatureConfig::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << "sample_rate=" << sample_rate << ";win=" << win << ";hop=" << hop
     << ";n_mels=" << n_mels << ";fmin=" << fmin << ";fmax=" << fmax
     << ";f0_min=" << f0_min << ";f0_max=" << f0_max
     << ";voicing_threshold=" << voicing_threshold << ";log_floor=" << log_floor
     << ";energy_domain=" << energy_domain << ";f0_std_floor=" << f0_std_floor;
  return fnv1a64(os.str());
}

int FeatureConfig::frame_count(size_t num_samples) const {
  if (num_samples < static_cast<size_t>(win)) return 0;
  return 1 + static_cast<int>((num_samples - static_cast<size_t>(win)) /
                              static_cast<size_t>(hop));
}

int PitchTrack::num_voiced() const {
  int n = 0;
  for (uint8_t v : voiced) n += v ? 1 : 0;
  return n;
}

double mel_bin_center_hz(const FeatureConfig& config, int bin) {
  double mel_lo = hz_to_mel(config.fmin);
  double mel_hi = hz_to_mel(config.fmax);
  return mel_to_hz(mel_lo + (mel_hi - mel_lo) * (bin + 1) / (config.n_mels + 1));
}

MelSpectrogram mel_spectrogram(const Waveform& wav, const FeatureConfig& config) {
  if (wav.sample_rate != config.sample_rate)
    fail(StatusCode::kInvalidArgument, "mel_spectrogram: waveform rate ",
         wav.sample_rate, " Hz does not match configured ", config.sample_rate, " Hz");
  int frames = config.frame_count(wav.samples.size());
  if (frames < 1)
    fail(StatusCode::kInvalidArgument, "mel_spectrogram: waveform shorter than one window (",
         wav.samples.size(), " < ", config.win, " samples)");

  size_t fft_size = dsp::next_pow2(static_cast<size_t>(config.win));
  auto window = dsp::hann_window(static_cast<size_t>(config.win));
  auto filters = mel_filterbank(config, fft_size);
  size_t n_bins = fft_size / 2 + 1;

  MelSpectrogram mel;
  mel.n_mels = config.n_mels;
  mel.frames = frames;
  mel.hop = config.hop;
  mel.sample_rate = config.sample_rate;
  mel.values.assign(static_cast<size_t>(config.n_mels) * frames, 0.0f);

  std::vector<double> frame(config.win);
  std::vector<double> mag(n_bins);
  for (int f = 0; f < frames; ++f) {
    size_t start = static_cast<size_t>(f) * config.hop;
    for (int i = 0; i < config.win; ++i)
      frame[i] = static_cast<double>(wav.samples[start + i]) * window[i];
    auto spec = dsp::fft_real(frame.data(), frame.size(), fft_size);
    for (size_t b = 0; b < n_bins; ++b) mag[b] = std::abs(spec[b]);
    for (int m = 0; m < config.n_mels; ++m) {
      double acc = 0.0;
      const auto& filt = filters[m];
      for (size_t b = 0; b < n_bins; ++b) acc += filt[b] * mag[b];
      double v = std::log(std::max(acc, config.log_floor));
      mel.values[static_cast<size_t>(m) * frames + f] = static_cast<float>(v);
    }
  }
  return mel;
}

EnergyTrack frame_energy(const MelSpectrogram& mel, const FeatureConfig& config) {
  EnergyTrack energy;
  energy.values.resize(mel.frames);
  const bool linear = config.energy_domain == "linear";
  for (int f = 0; f < mel.frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < mel.n_mels; ++c) {
      double v = mel.at(c, f);
      acc += linear ? std::exp(v) : v;
    }
    energy.values[f] = static_cast<float>(acc / mel.n_mels);
  }
  return energy;
}

PitchTrack extract_f0(const Waveform& wav, const FeatureConfig& config) {
  if (wav.sample_rate != config.sample_rate)
    fail(StatusCode::kInvalidArgument, "extract_f0: waveform rate ", wav.sample_rate,
         " Hz does not match configured ", config.sample_rate, " Hz");
  int frames = config.frame_count(wav.samples.size());
  PitchTrack track;
  track.f0_hz.assign(std::max(frames, 0), 0.0f);
  track.voiced.assign(std::max(frames, 0), 0);
  if (frames < 1) return track;

  const double sr = config.sample_rate;
  int tau_min = std::max(2, static_cast<int>(std::floor(sr / config.f0_max)));
  int tau_max = static_cast<int>(std::ceil(sr / config.f0_min));
  // The correlation span W plus the largest lag must fit inside the window.
  int w_size = config.win / 2;
  tau_max = std::min(tau_max, config.win - w_size);
  if (tau_max <= tau_min)
    fail(StatusCode::kInvalidArgument, "extract_f0: f0 search range incompatible with window");

  std::vector<double> diff(tau_max + 1, 0.0);
  std::vector<double> cmnd(tau_max + 1, 1.0);
  for (int f = 0; f < frames; ++f) {
    const float* x = wav.samples.data() + static_cast<size_t>(f) * config.hop;
    // YIN difference function over lag range.
    for (int tau = 1; tau <= tau_max; ++tau) {
      double acc = 0.0;
      for (int j = 0; j < w_size; ++j) {
        double d = static_cast<double>(x[j]) - static_cast<double>(x[j + tau]);
        acc += d * d;
      }
      diff[tau] = acc;
    }
    // Cumulative-mean normalization.
    double running = 0.0;
    for (int tau = 1; tau <= tau_max; ++tau) {
      running += diff[tau];
      cmnd[tau] = running > 0.0 ? diff[tau] * tau / running : 1.0;
    }
    // First dip under threshold wins; otherwise take the global minimum.
    int best = -1;
    for (int tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[tau] < config.voicing_threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best < 0) {
      double min_v = cmnd[tau_min];
      best = tau_min;
      for (int tau = tau_min; tau <= tau_max; ++tau) {
        if (cmnd[tau] < min_v) {
          min_v = cmnd[tau];
          best = tau;
        }
      }
      if (min_v >= config.voicing_threshold) continue;  // unvoiced frame
    }
    // Parabolic interpolation around the minimum for sub-sample lag.
    double tau_refined = best;
    if (best > tau_min && best < tau_max) {
      double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
      double denom = a - 2.0 * b + c;
      if (std::abs(denom) > 1e-12) {
        double delta = 0.5 * (a - c) / denom;
        if (delta > -1.0 && delta < 1.0) tau_refined += delta;
      }
    }
    track.f0_hz[f] = static_cast<float>(sr / tau_refined);
    track.voiced[f] = 1;
  }
  return track;
}

std::vector<SpeakerPitchStats> speaker_f0_stats(
    const std::vector<std::pair<int, const PitchTrack*>>& tracks,
    const FeatureConfig& config) {
  struct Acc {
    double sum = 0.0;
    double sum_sq = 0.0;
    int64_t n = 0;
  };
  std::map<int, Acc> by_speaker;
  for (const auto& [speaker, track] : tracks) {
    Acc& acc = by_speaker[speaker];
    for (size_t f = 0; f < track->f0_hz.size(); ++f) {
      if (!track->voiced[f]) continue;
      acc.sum += track->f0_hz[f];
      acc.sum_sq += static_cast<double>(track->f0_hz[f]) * track->f0_hz[f];
      acc.n += 1;
    }
  }
  std::vector<SpeakerPitchStats> out;
  for (const auto& [speaker, acc] : by_speaker) {
    if (acc.n == 0)
      fail(StatusCode::kInvalidArgument, "speaker ", speaker, " has no voiced frames");
    SpeakerPitchStats stats;
    stats.speaker_id = speaker;
    stats.mean_hz = acc.sum / static_cast<double>(acc.n);
    double var = acc.sum_sq / static_cast<double>(acc.n) - stats.mean_hz * stats.mean_hz;
    stats.std_hz = std::max(std::sqrt(std::max(var, 0.0)), config.f0_std_floor);
    stats.n_voiced_frames = acc.n;
    out.push_back(stats);
  }
  return out;
}

std::vector<float> standardize_f0(const PitchTrack& track, const SpeakerPitchStats& stats,
                                  const FeatureConfig& config) {
  if (stats.std_hz < config.f0_std_floor)
    fail(StatusCode::kInvalidArgument, "speaker ", stats.speaker_id,
         ": f0 std ", stats.std_hz, " below floor ", config.f0_std_floor);
  std::vector<float> out(track.f0_hz.size(), 0.0f);
  for (size_t f = 0; f < track.f0_hz.size(); ++f) {
    if (track.voiced[f])
      out[f] = static_cast<float>((track.f0_hz[f] - stats.mean_hz) / stats.std_hz);
  }
  return out;
}

std::vector<float> destandardize_f0(const std::vector<float>& f0_norm,
                                    const std::vector<uint8_t>& voiced,
                                    const SpeakerPitchStats& stats) {
  if (f0_norm.size() != voiced.size())
    fail(StatusCode::kInvalidArgument, "destandardize_f0: length mismatch");
  std::vector<float> out(f0_norm.size(), 0.0f);
  for (size_t f = 0; f < f0_norm.size(); ++f) {
    if (voiced[f])
      out[f] = static_cast<float>(f0_norm[f] * stats.std_hz + stats.mean_hz);
  }
  return out;
}

}  // namespace mmtts
