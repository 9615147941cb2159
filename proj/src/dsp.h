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

#ifndef MMTTS_SRC_DSP_H_
#define MMTTS_SRC_DSP_H_

#include <complex>
#include <cstddef>
#include <vector>

namespace mmtts::dsp {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>* data, bool inverse);

// Forward FFT of a real signal zero-padded/truncated to `size` (power of 2).
std::vector<std::complex<double>> fft_real(const double* x, size_t n, size_t size);

size_t next_pow2(size_t n);

// Periodic Hann window (the analysis window used throughout).
std::vector<double> hann_window(size_t size);

// Linear-interpolation resampler by an arbitrary rate factor; output length
// is round(n / rate) for playback-rate semantics (rate > 1 shortens).
std::vector<float> resample_linear(const std::vector<float>& x, double rate);

}  // namespace mmtts::dsp

#endif  // MMTTS_SRC_DSP_H_
