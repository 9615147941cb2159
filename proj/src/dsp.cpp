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

#include "dsp.h"

#include <cmath>

#include "util.h"

namespace mmtts::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<std::complex<double>>* data, bool inverse) {
  auto& a = *data;
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    fail(StatusCode::kInvalidArgument, "fft size must be a power of two, got ", n);

  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    double angle = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

std::vector<std::complex<double>> fft_real(const double* x, size_t n, size_t size) {
  std::vector<std::complex<double>> buf(size, {0.0, 0.0});
  size_t m = n < size ? n : size;
  for (size_t i = 0; i < m; ++i) buf[i] = {x[i], 0.0};
  fft(&buf, false);
  return buf;
}

std::vector<double> hann_window(size_t size) {
  std::vector<double> w(size);
  for (size_t i = 0; i < size; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(size));
  return w;
}

std::vector<float> resample_linear(const std::vector<float>& x, double rate) {
  if (rate <= 0.0) fail(StatusCode::kInvalidArgument, "resample rate must be positive");
  if (x.empty()) return {};
  size_t out_len = static_cast<size_t>(std::llround(static_cast<double>(x.size()) / rate));
  std::vector<float> out(out_len);
  for (size_t i = 0; i < out_len; ++i) {
    double pos = static_cast<double>(i) * rate;
    auto i0 = static_cast<size_t>(pos);
    if (i0 >= x.size() - 1) {
      out[i] = x.back();
      continue;
    }
    double frac = pos - static_cast<double>(i0);
    out[i] = static_cast<float>((1.0 - frac) * x[i0] + frac * x[i0 + 1]);
  }
  return out;
}

}  // namespace mmtts::dsp
