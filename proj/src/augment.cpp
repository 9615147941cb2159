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

#include "augment.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "dsp.h"
#include "rng.h"
#include "util.h"

namespace mmtts {

namespace fs = std::filesystem;

namespace {

void check_factor(double factor) {
  if (factor < 0.5 || factor > 2.0) {
    fail(StatusCode::kInvalidArgument, "scale factor ", factor, " outside [0.5, 2.0]");
  }
}

struct PitchMark {
  int position;    // sample index
  double period;   // local period in samples
  bool voiced;
};

// Marks sit on local waveform maxima inside voiced regions so grains line up
// with glottal pulses; unvoiced stretches get fixed-spacing unvoiced marks.
std::vector<PitchMark> pitch_marks(const Waveform& wav, const PitchTrack& pitch,
                                   const FeatureConfig& config) {
  const int n = static_cast<int>(wav.samples.size());
  const int hop = config.hop;
  const int half_win = config.win / 2;
  const double unvoiced_period = 0.005 * wav.sample_rate;

  auto frame_of = [&](int sample) {
    // Frame f covers [f*hop, f*hop + win); its center is f*hop + win/2.
    int f = (sample - half_win) / hop;
    return std::clamp(f, 0, static_cast<int>(pitch.f0_hz.size()) - 1);
  };
  auto local_period = [&](int sample) -> double {
    const int f = frame_of(sample);
    if (!pitch.voiced[f]) return 0.0;
    return wav.sample_rate / pitch.f0_hz[f];
  };

  std::vector<PitchMark> marks;
  int pos = 0;
  while (pos < n) {
    const double period = local_period(pos);
    if (period <= 0.0) {
      marks.push_back({pos, unvoiced_period, false});
      pos += static_cast<int>(unvoiced_period);
      continue;
    }
    // Snap the mark to the strongest peak within half a period.
    const int lo = pos;
    const int hi = std::min(n - 1, pos + static_cast<int>(period / 2));
    int best = lo;
    for (int i = lo; i <= hi; ++i) {
      if (wav.samples[i] > wav.samples[best]) best = i;
    }
    marks.push_back({best, period, true});
    pos = best + static_cast<int>(period);
    if (pos <= best) pos = best + 1;
  }
  return marks;
}

int nearest_mark(const std::vector<PitchMark>& marks, double position) {
  int lo = 0;
  int hi = static_cast<int>(marks.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (marks[mid].position < position) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo > 0 && std::abs(marks[lo - 1].position - position) <=
                    std::abs(marks[lo].position - position)) {
    return lo - 1;
  }
  return lo;
}

void overlap_add_grain(const Waveform& wav, const PitchMark& mark, double out_center,
                       std::vector<double>* acc, std::vector<double>* wsum) {
  const int n = static_cast<int>(wav.samples.size());
  const int half = std::max(8, static_cast<int>(mark.period));
  const int len = 2 * half;
  const int center = static_cast<int>(std::lround(out_center));
  for (int i = 0; i < len; ++i) {
    const int src = mark.position - half + i;
    const int dst = center - half + i;
    if (src < 0 || src >= n || dst < 0 || dst >= static_cast<int>(acc->size())) continue;
    // Hann over the grain; endpoints are zero so seams stay smooth.
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / len);
    (*acc)[dst] += w * wav.samples[src];
    (*wsum)[dst] += w;
  }
}

}  // namespace

const char* augment_kind_name(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kFormantDown: return "formant_down";
    case AugmentKind::kFormantUp: return "formant_up";
    case AugmentKind::kF0Down: return "f0_down";
    case AugmentKind::kF0Up: return "f0_up";
    case AugmentKind::kFaster: return "faster";
    case AugmentKind::kSlower: return "slower";
  }
  return "unknown";
}

std::vector<AugmentSpec> default_augment_specs() {
  return {
      {AugmentKind::kFormantDown, 0.875, 1.0},
      {AugmentKind::kFormantUp, 1.0, 1.25},
      {AugmentKind::kF0Down, 0.9, 1.0},
      {AugmentKind::kF0Up, 1.0, 1.1},
      {AugmentKind::kFaster, 0.9, 1.0},
      {AugmentKind::kSlower, 1.0, 1.1},
  };
}

Waveform scale_f0(const Waveform& wav, double factor, const FeatureConfig& config,
                  bool* unvoiced_passthrough) {
  check_factor(factor);
  if (unvoiced_passthrough) *unvoiced_passthrough = false;
  if (wav.samples.empty()) return wav;

  const PitchTrack pitch = extract_f0(wav, config);
  if (pitch.num_voiced() == 0) {
    if (unvoiced_passthrough) *unvoiced_passthrough = true;
    return wav;
  }

  const std::vector<PitchMark> marks = pitch_marks(wav, pitch, config);
  const int n = static_cast<int>(wav.samples.size());
  std::vector<double> acc(n, 0.0);
  std::vector<double> wsum(n, 0.0);

  // Pitch shift without time change: output time tracks input time, grain
  // spacing is period/factor for voiced marks, unchanged for unvoiced.
  double t = marks.front().position;
  while (t < n) {
    const PitchMark& mark = marks[nearest_mark(marks, t)];
    overlap_add_grain(wav, mark, t, &acc, &wsum);
    const double spacing = mark.voiced ? mark.period / factor : mark.period;
    t += std::max(1.0, spacing);
  }

  Waveform out;
  out.sample_rate = wav.sample_rate;
  out.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    out.samples[i] = wsum[i] > 0.05 ? static_cast<float>(acc[i] / wsum[i]) : wav.samples[i];
  }
  return out;
}

Waveform scale_duration(const Waveform& wav, double rate, const FeatureConfig& config) {
  check_factor(rate);
  (void)config;
  const int n = static_cast<int>(wav.samples.size());
  Waveform out;
  out.sample_rate = wav.sample_rate;
  const int out_len = static_cast<int>(std::lround(rate * n));
  if (n == 0 || out_len == 0) return out;
  if (std::abs(rate - 1.0) < 1e-9) {
    out.samples = wav.samples;
    return out;
  }

  const int win = 512;
  const int hop = win / 2;  // Hann at 50% overlap sums to 1
  const int tolerance = 200;
  const std::vector<double> window = dsp::hann_window(win);

  std::vector<double> acc(out_len + win, 0.0);
  std::vector<double> wsum(out_len + win, 0.0);

  auto add_frame = [&](int src, int dst) {
    for (int i = 0; i < win; ++i) {
      const int s = src + i;
      const int d = dst + i;
      if (s < 0 || s >= n || d < 0 || d >= static_cast<int>(acc.size())) continue;
      acc[d] += window[i] * wav.samples[s];
      wsum[d] += window[i];
    }
  };

  int prev_src = 0;
  add_frame(0, 0);
  for (int k = 1; k * hop < out_len; ++k) {
    const int dst = k * hop;
    const int ideal = static_cast<int>(std::lround(dst / rate));
    // The natural continuation of the previous grain keeps waveform phase;
    // search around the ideal position for the best match to it.
    const int natural = prev_src + hop;
    int best_src = std::clamp(ideal, 0, n - 1);
    double best_score = -1e300;
    const int lo = std::max(0, ideal - tolerance);
    const int hi = std::min(n - win, ideal + tolerance);
    for (int cand = lo; cand <= hi; ++cand) {
      double score = 0.0;
      for (int i = 0; i < win; i += 4) {  // stride-4 correlation is plenty
        const int a = natural + i;
        const int b = cand + i;
        if (a < 0 || a >= n || b < 0 || b >= n) continue;
        score += wav.samples[a] * wav.samples[b];
      }
      if (score > best_score) {
        best_score = score;
        best_src = cand;
      }
    }
    if (hi < lo) best_src = std::clamp(ideal, 0, std::max(0, n - win));
    add_frame(best_src, dst);
    prev_src = best_src;
  }

  out.samples.resize(out_len);
  for (int i = 0; i < out_len; ++i) {
    out.samples[i] = wsum[i] > 0.05 ? static_cast<float>(acc[i] / wsum[i]) : 0.0f;
  }
  return out;
}

Waveform scale_formants(const Waveform& wav, double factor, const FeatureConfig& config) {
  check_factor(factor);
  const int n = static_cast<int>(wav.samples.size());
  Waveform out;
  out.sample_rate = wav.sample_rate;
  if (n == 0) return out;
  if (std::abs(factor - 1.0) < 1e-9) {
    out.samples = wav.samples;
    return out;
  }

  const int win = config.win;
  const int hop = win / 4;  // 75% overlap for smooth weighted OLA
  const int lifter = 32;    // quefrency cutoff: envelope below, excitation above
  const std::vector<double> window = dsp::hann_window(win);
  const double log_floor = std::log(1e-10);

  std::vector<double> acc(n + win, 0.0);
  std::vector<double> wsq(n + win, 0.0);

  std::vector<std::complex<double>> spec(win);
  std::vector<std::complex<double>> ceps(win);
  std::vector<std::complex<double>> env_spec(win);

  for (int start = -win + hop; start < n; start += hop) {
    for (int i = 0; i < win; ++i) {
      const int s = start + i;
      spec[i] = (s >= 0 && s < n) ? window[i] * wav.samples[s] : 0.0;
    }
    dsp::fft(&spec, false);

    // Real cepstrum of the log magnitude, liftered to the envelope band.
    for (int i = 0; i < win; ++i) {
      ceps[i] = std::max(std::log(std::abs(spec[i])), log_floor);
    }
    dsp::fft(&ceps, true);
    for (int i = 0; i < win; ++i) {
      const bool keep = i <= lifter || i >= win - lifter;
      ceps[i] = keep ? std::complex<double>(ceps[i].real(), 0.0) : 0.0;
    }
    env_spec = ceps;
    dsp::fft(&env_spec, false);

    // env_spec[i].real() is the log envelope at bin i. Warp: bin i of the
    // output reads the input envelope at i/factor, so peaks move up by
    // `factor` when factor > 1. Bins are warped over the half spectrum and
    // mirrored to keep the time signal real.
    const int half = win / 2;
    std::vector<double> warped(half + 1);
    for (int i = 0; i <= half; ++i) {
      const double src = i / factor;
      const int i0 = static_cast<int>(src);
      const double frac = src - i0;
      const double a = env_spec[std::min(i0, half)].real();
      const double b = env_spec[std::min(i0 + 1, half)].real();
      warped[i] = a + frac * (b - a);
    }
    for (int i = 0; i < win; ++i) {
      const int bin = i <= half ? i : win - i;
      const double log_mag = std::max(std::log(std::abs(spec[i])), log_floor);
      const double residual = log_mag - env_spec[bin >= 0 && bin <= half ? bin : 0].real();
      const double new_mag = std::exp(warped[bin] + residual);
      const double old_mag = std::abs(spec[i]);
      spec[i] = old_mag > 1e-12 ? spec[i] * (new_mag / old_mag)
                                : std::complex<double>(new_mag, 0.0);
    }
    dsp::fft(&spec, true);

    for (int i = 0; i < win; ++i) {
      const int d = start + i;
      if (d < 0 || d >= n) continue;
      acc[d] += window[i] * spec[i].real();
      wsq[d] += window[i] * window[i];
    }
  }

  out.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    out.samples[i] = wsq[i] > 1e-6 ? static_cast<float>(acc[i] / wsq[i]) : wav.samples[i];
  }
  return out;
}

Waveform apply_augment(const Waveform& wav, AugmentKind kind, double factor,
                       const FeatureConfig& config, bool* unvoiced_passthrough) {
  if (unvoiced_passthrough) *unvoiced_passthrough = false;
  switch (kind) {
    case AugmentKind::kFormantDown:
    case AugmentKind::kFormantUp:
      return scale_formants(wav, factor, config);
    case AugmentKind::kF0Down:
    case AugmentKind::kF0Up:
      return scale_f0(wav, factor, config, unvoiced_passthrough);
    case AugmentKind::kFaster:
    case AugmentKind::kSlower:
      return scale_duration(wav, factor, config);
  }
  fail(StatusCode::kInvalidArgument, "unknown augment kind");
}

int relabel_speaker(int speaker_id, int t, int n_speakers) {
  if (n_speakers < 1) {
    fail(StatusCode::kInvalidArgument, "n_speakers must be >= 1, got ", n_speakers);
  }
  if (speaker_id < 0 || speaker_id >= n_speakers) {
    fail(StatusCode::kInvalidArgument, "speaker id ", speaker_id, " outside [0, ", n_speakers, ")");
  }
  if (t < 1) {
    fail(StatusCode::kInvalidArgument, "transform stratum t must be >= 1 (0 is the originals), got ",
         t);
  }
  return speaker_id + t * n_speakers;
}

DatasetManifest augment_dataset(const DatasetManifest& manifest,
                                const std::vector<AugmentSpec>& specs, const std::string& out_dir,
                                const FeatureConfig& config, uint64_t seed,
                                AugmentReport* report) {
  if (specs.empty()) {
    fail(StatusCode::kInvalidArgument, "augment_dataset needs at least one spec");
  }
  fs::create_directories(out_dir);
  AugmentReport local;
  AugmentReport& rep = report ? *report : local;

  std::ostringstream merged;
  merged << "# augmented dataset: seed=" << seed << "\n";
  for (size_t i = 0; i < specs.size(); ++i) {
    merged << "# t=" << (i + 1) << " " << augment_kind_name(specs[i].kind) << " x["
           << specs[i].factor_lo << ", " << specs[i].factor_hi << "]\n";
  }
  // Originals first, then each stratum in source order: first-appearance id
  // assignment then reproduces speaker_id + t * n_speakers on reparse.
  // Original paths go in absolute (they live outside out_dir); augmented rows
  // use bare filenames so out_dir stays relocatable as a unit.
  for (const UtteranceRecord& r : manifest.records) {
    merged << fs::absolute(r.audio_path).lexically_normal().string() << "|" << r.ipa_text << "|"
           << manifest.speaker_names[r.speaker_id] << "|" << manifest.accent_names[r.accent_id]
           << "|" << manifest.language_names[r.language_id] << "\n";
  }

  Rng rng(seed);
  for (size_t si = 0; si < specs.size(); ++si) {
    const AugmentSpec& spec = specs[si];
    const int t = static_cast<int>(si) + 1;
    for (const UtteranceRecord& r : manifest.records) {
      const double factor = rng.uniform(spec.factor_lo, spec.factor_hi);
      const std::string out_name = fs::path(r.audio_path).stem().string() + "_" +
                                   hex64(fnv1a64(r.audio_path)).substr(0, 8) + "_t" +
                                   std::to_string(t) + ".wav";
      const std::string out_path = (fs::path(out_dir) / out_name).string();
      try {
        const Waveform wav = read_wav(r.audio_path);
        bool unvoiced = false;
        const Waveform transformed = apply_augment(wav, spec.kind, factor, config, &unvoiced);
        if (unvoiced) {
          rep.warnings.push_back(r.audio_path + ": fully unvoiced, passed through unchanged");
        }
        write_wav(out_path, transformed);
        ++rep.written;
        // Fresh speaker name per stratum so id interning lands on s + t*N.
        merged << out_name << "|" << r.ipa_text << "|" << manifest.speaker_names[r.speaker_id]
               << "#t" << t << "|" << manifest.accent_names[r.accent_id] << "|"
               << manifest.language_names[r.language_id] << "\n";
      } catch (const Error& e) {
        rep.failures.push_back(r.audio_path + ": " + e.what());
      }
    }
  }

  const std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  write_text_file(manifest_path, merged.str());
  return parse_manifest(manifest_path, manifest.sample_rate_hz);
}

}  // namespace mmtts
