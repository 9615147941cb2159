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

#ifndef MMTTS_SRC_WAV_H_
#define MMTTS_SRC_WAV_H_

#include <string>
#include <vector>

namespace mmtts {

// Mono audio in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads mono PCM16 or IEEE float32 WAV. Anything else is an error; format
// conversion beyond that is out of scope.
Waveform read_wav(const std::string& path);

// Writes mono PCM16; samples are clipped to [-1, 1].
void write_wav(const std::string& path, const Waveform& wav);

// Header probe without decoding samples; returns sample rate, or throws.
int read_wav_sample_rate(const std::string& path);

}  // namespace mmtts

#endif  // MMTTS_SRC_WAV_H_
