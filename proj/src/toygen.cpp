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

#include "toygen.h"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "config.h"
#include "rng.h"
#include "util.h"

namespace mmtts {

namespace fs = std::filesystem;

namespace {

struct Vowel {
  const char* symbol;
  double f1, f2;
};

constexpr Vowel kVowels[] = {
    {"a", 800.0, 1200.0}, {"e", 500.0, 1900.0}, {"i", 300.0, 2300.0},
    {"o", 500.0, 900.0},  {"u", 320.0, 800.0},
};
constexpr int kNumVowels = 5;

struct Accent {
  const char* name;
  const char* language;
  double vowel_seconds;
  double formant_scale;
};

constexpr Accent kAccents[] = {
    {"alpha", "lang_alpha", 0.14, 1.0},
    {"beta", "lang_beta", 0.18, 1.12},
};

// Two-pole resonator: r fixes the bandwidth, the pole angle the center.
void resonate(const std::vector<float>& x, double center_hz, double bandwidth_hz, int sample_rate,
              std::vector<float>* y) {
  const double r = std::exp(-M_PI * bandwidth_hz / sample_rate);
  const double a1 = 2.0 * r * std::cos(2.0 * M_PI * center_hz / sample_rate);
  const double a2 = -r * r;
  double y1 = 0.0, y2 = 0.0;
  y->resize(x.size());
  for (size_t n = 0; n < x.size(); ++n) {
    const double v = x[n] + a1 * y1 + a2 * y2;
    (*y)[n] = static_cast<float>(v);
    y2 = y1;
    y1 = v;
  }
}

}  // namespace

Waveform synth_vowel(double f0_hz, double formant1_hz, double formant2_hz, double seconds,
                     int sample_rate) {
  if (f0_hz <= 0 || seconds <= 0 || sample_rate <= 0) {
    fail(StatusCode::kInvalidArgument, "synth_vowel needs positive f0, duration and rate");
  }
  const int n = static_cast<int>(std::lround(seconds * sample_rate));
  std::vector<float> pulses(n, 0.0f);
  // Mild vibrato keeps the extracted F0 track from being degenerate.
  double phase = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f0 = f0_hz * (1.0 + 0.02 * std::sin(2.0 * M_PI * 5.0 * i / sample_rate));
    phase += f0 / sample_rate;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulses[i] = 1.0f;
    }
  }
  std::vector<float> band1, band2;
  resonate(pulses, formant1_hz, 80.0, sample_rate, &band1);
  resonate(pulses, formant2_hz, 120.0, sample_rate, &band2);

  Waveform wav;
  wav.sample_rate = sample_rate;
  wav.samples.resize(n);
  float peak = 1e-9f;
  for (int i = 0; i < n; ++i) {
    wav.samples[i] = band1[i] + 0.6f * band2[i];
    peak = std::max(peak, std::abs(wav.samples[i]));
  }
  const int fade = std::min(n / 4, sample_rate / 100);  // 10 ms edges
  for (int i = 0; i < n; ++i) {
    float g = 0.3f / peak;
    if (i < fade) g *= static_cast<float>(i) / fade;
    if (n - 1 - i < fade) g *= static_cast<float>(n - 1 - i) / fade;
    wav.samples[i] *= g;
  }
  return wav;
}

ToyCorpus make_toy_corpus(const std::string& out_dir, const ToyCorpusOptions& options) {
  if (options.n_speakers < 1 || options.n_utterances < 1) {
    fail(StatusCode::kInvalidArgument, "toy corpus needs >= 1 speaker and >= 1 utterance");
  }
  fs::create_directories(out_dir);
  Rng rng(options.seed);

  std::ostringstream manifest_text;
  manifest_text << "# synthetic vowel corpus: " << options.n_speakers << " speakers, "
                << options.n_utterances << " utterances, seed " << options.seed << "\n";

  for (int u = 0; u < options.n_utterances; ++u) {
    const int speaker = u % options.n_speakers;
    const int accent = speaker % 2;  // both accents span the F0 range
    const Accent& acc = kAccents[accent];
    const double speaker_f0 = 110.0 + 30.0 * speaker;
    const double utt_f0 = speaker_f0 * rng.uniform(0.95, 1.05);

    const int n_vowels = 3 + static_cast<int>(rng.uniform_int(4));  // 3..6
    std::vector<int> vowel_ids;
    for (int v = 0; v < n_vowels; ++v) {
      vowel_ids.push_back(static_cast<int>(rng.uniform_int(kNumVowels)));
    }

    std::string text;
    std::vector<float> samples;
    const int gap = options.sample_rate / 25;  // 40 ms pause per word break
    for (int v = 0; v < n_vowels; ++v) {
      if (v > 0) {
        text += " ";
        samples.insert(samples.end(), gap, 0.0f);
      }
      const Vowel& vowel = kVowels[vowel_ids[v]];
      text += vowel.symbol;
      const Waveform seg =
          synth_vowel(utt_f0, vowel.f1 * acc.formant_scale, vowel.f2 * acc.formant_scale,
                      acc.vowel_seconds, options.sample_rate);
      samples.insert(samples.end(), seg.samples.begin(), seg.samples.end());
    }

    std::ostringstream name;
    name << "utt_" << std::setw(4) << std::setfill('0') << u << ".wav";
    Waveform wav;
    wav.sample_rate = options.sample_rate;
    wav.samples = std::move(samples);
    write_wav((fs::path(out_dir) / name.str()).string(), wav);

    manifest_text << name.str() << "|" << text << "|spk" << speaker << "|" << acc.name << "|"
                  << acc.language << "\n";
  }

  ToyCorpus corpus;
  corpus.manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  write_text_file(corpus.manifest_path, manifest_text.str());

  ToolkitConfig config;
  config.features.sample_rate = options.sample_rate;
  corpus.config_path = (fs::path(out_dir) / "config.cfg").string();
  write_text_file(corpus.config_path, config.emit());

  corpus.manifest = parse_manifest(corpus.manifest_path, options.sample_rate);
  return corpus;
}

}  // namespace mmtts
