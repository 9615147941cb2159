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

#include "wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "util.h"

namespace mmtts {

namespace {

struct FmtChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits_per_sample = 0;
};

uint32_t read_u32(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  uint8_t b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<char*>(b), 2);
}

// Walks RIFF chunks, fills fmt and positions the stream at the data payload.
// Returns the data chunk size.
uint32_t locate_data(std::istream& in, const std::string& path, FmtChunk* fmt) {
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    fail(StatusCode::kParseError, path, ": not a RIFF file");
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    fail(StatusCode::kParseError, path, ": not a WAVE file");
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    uint32_t size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      fmt->format = read_u16(in);
      fmt->channels = read_u16(in);
      fmt->sample_rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      fmt->bits_per_sample = read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) fail(StatusCode::kParseError, path, ": data chunk before fmt");
      return size;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  fail(StatusCode::kParseError, path, ": no data chunk");
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(StatusCode::kIoError, "cannot open audio file: ", path);
  FmtChunk fmt;
  uint32_t data_size = locate_data(in, path, &fmt);
  if (fmt.channels != 1)
    fail(StatusCode::kInvalidArgument, path, ": expected mono audio, got ",
         fmt.channels, " channels");
  Waveform wav;
  wav.sample_rate = static_cast<int>(fmt.sample_rate);
  if (fmt.format == 1 && fmt.bits_per_sample == 16) {
    size_t n = data_size / 2;
    wav.samples.resize(n);
    std::vector<uint8_t> raw(data_size);
    in.read(reinterpret_cast<char*>(raw.data()), data_size);
    if (!in) fail(StatusCode::kIoError, path, ": truncated data chunk");
    for (size_t i = 0; i < n; ++i) {
      int16_t s = static_cast<int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
      wav.samples[i] = static_cast<float>(s) / 32768.0f;
    }
  } else if (fmt.format == 3 && fmt.bits_per_sample == 32) {
    size_t n = data_size / 4;
    wav.samples.resize(n);
    in.read(reinterpret_cast<char*>(wav.samples.data()), n * 4);
    if (!in) fail(StatusCode::kIoError, path, ": truncated data chunk");
  } else {
    fail(StatusCode::kInvalidArgument, path, ": unsupported WAV format (fmt=",
         fmt.format, ", bits=", fmt.bits_per_sample, "); expected PCM16 or float32");
  }
  return wav;
}

int read_wav_sample_rate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(StatusCode::kIoError, "cannot open audio file: ", path);
  FmtChunk fmt;
  locate_data(in, path, &fmt);
  return static_cast<int>(fmt.sample_rate);
}

void write_wav(const std::string& path, const Waveform& wav) {
  if (wav.sample_rate <= 0)
    fail(StatusCode::kInvalidArgument, "write_wav: sample rate must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(StatusCode::kIoError, "cannot write audio file: ", path);
  uint32_t data_size = static_cast<uint32_t>(wav.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(wav.sample_rate));
  write_u32(out, static_cast<uint32_t>(wav.sample_rate * 2));
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_size);
  for (float s : wav.samples) {
    float clipped = std::clamp(s, -1.0f, 1.0f);
    auto q = static_cast<int16_t>(std::lrintf(clipped * 32767.0f));
    uint8_t b[2] = {static_cast<uint8_t>(q & 0xff), static_cast<uint8_t>((q >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
  }
  if (!out) fail(StatusCode::kIoError, "write failed: ", path);
}

}  // namespace mmtts
