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

#include "binio.h"

#include <cstring>
#include <fstream>

#include "util.h"

namespace mmtts {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'T', 'B'};

void append_u16(std::vector<uint8_t>* buf, uint16_t v) {
  buf->push_back(static_cast<uint8_t>(v));
  buf->push_back(static_cast<uint8_t>(v >> 8));
}

void append_u32(std::vector<uint8_t>* buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf->push_back(static_cast<uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size, const std::string& path)
      : data_(data), size_(size), path_(path) {}

  uint8_t u8() { return *take(1); }
  uint16_t u16() {
    const uint8_t* p = take(2);
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
  }
  uint32_t u32() {
    const uint8_t* p = take(4);
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }
  const uint8_t* take(size_t n) {
    if (pos_ + n > size_)
      fail(StatusCode::kParseError, path_, ": truncated bundle at byte ", pos_);
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  size_t pos() const { return pos_; }

 private:
  const uint8_t* data_;
  size_t size_;
  const std::string& path_;
  size_t pos_ = 0;
};

size_t element_size(uint8_t dtype) {
  switch (dtype) {
    case 0: return 4;   // f32
    case 1: return 4;   // i32
    case 2: return 1;   // bytes
    case 3: return 8;   // f64
  }
  fail(StatusCode::kParseError, "unknown dtype tag ", static_cast<int>(dtype));
}

}  // namespace

void TensorBundle::put_f32(const std::string& name, std::vector<uint32_t> dims,
                           const std::vector<float>& data) {
  uint64_t n = 1;
  for (uint32_t d : dims) n *= d;
  if (n != data.size())
    fail(StatusCode::kInvalidArgument, "bundle section ", name,
         ": dims do not match data size");
  Section s;
  s.dtype = kF32;
  s.dims = std::move(dims);
  s.payload.resize(data.size() * 4);
  std::memcpy(s.payload.data(), data.data(), s.payload.size());
  sections_[name] = std::move(s);
}

void TensorBundle::put_f64(const std::string& name, std::vector<uint32_t> dims,
                           const std::vector<double>& data) {
  uint64_t n = 1;
  for (uint32_t d : dims) n *= d;
  if (n != data.size())
    fail(StatusCode::kInvalidArgument, "bundle section ", name,
         ": dims do not match data size");
  Section s;
  s.dtype = kF64;
  s.dims = std::move(dims);
  s.payload.resize(data.size() * 8);
  std::memcpy(s.payload.data(), data.data(), s.payload.size());
  sections_[name] = std::move(s);
}

void TensorBundle::put_i32(const std::string& name, const std::vector<int32_t>& data) {
  Section s;
  s.dtype = kI32;
  s.dims = {static_cast<uint32_t>(data.size())};
  s.payload.resize(data.size() * 4);
  std::memcpy(s.payload.data(), data.data(), s.payload.size());
  sections_[name] = std::move(s);
}

void TensorBundle::put_bytes(const std::string& name, const std::string& data) {
  Section s;
  s.dtype = kBytes;
  s.dims = {static_cast<uint32_t>(data.size())};
  s.payload.assign(data.begin(), data.end());
  sections_[name] = std::move(s);
}

bool TensorBundle::has(const std::string& name) const {
  return sections_.count(name) != 0;
}

std::vector<std::string> TensorBundle::names() const {
  std::vector<std::string> out;
  out.reserve(sections_.size());
  for (const auto& [name, _] : sections_) out.push_back(name);
  return out;
}

const TensorBundle::Section& TensorBundle::section(const std::string& name,
                                                   DType expected) const {
  auto it = sections_.find(name);
  if (it == sections_.end())
    fail(StatusCode::kNotFound, "bundle section not found: ", name);
  if (it->second.dtype != expected)
    fail(StatusCode::kInvalidArgument, "bundle section ", name, " has wrong dtype");
  return it->second;
}

const std::vector<uint32_t>& TensorBundle::dims(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end())
    fail(StatusCode::kNotFound, "bundle section not found: ", name);
  return it->second.dims;
}

std::vector<float> TensorBundle::get_f32(const std::string& name) const {
  const Section& s = section(name, kF32);
  std::vector<float> out(s.payload.size() / 4);
  std::memcpy(out.data(), s.payload.data(), s.payload.size());
  return out;
}

std::vector<double> TensorBundle::get_f64(const std::string& name) const {
  const Section& s = section(name, kF64);
  std::vector<double> out(s.payload.size() / 8);
  std::memcpy(out.data(), s.payload.data(), s.payload.size());
  return out;
}

std::vector<int32_t> TensorBundle::get_i32(const std::string& name) const {
  const Section& s = section(name, kI32);
  std::vector<int32_t> out(s.payload.size() / 4);
  std::memcpy(out.data(), s.payload.data(), s.payload.size());
  return out;
}

std::string TensorBundle::get_bytes(const std::string& name) const {
  const Section& s = section(name, kBytes);
  return std::string(s.payload.begin(), s.payload.end());
}

void TensorBundle::save(const std::string& path) const {
  std::vector<uint8_t> body;
  append_u32(&body, kVersion);
  append_u32(&body, static_cast<uint32_t>(sections_.size()));
  for (const auto& [name, s] : sections_) {
    append_u16(&body, static_cast<uint16_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    body.push_back(static_cast<uint8_t>(s.dtype));
    body.push_back(static_cast<uint8_t>(s.dims.size()));
    for (uint32_t d : s.dims) append_u32(&body, d);
    body.insert(body.end(), s.payload.begin(), s.payload.end());
  }
  uint32_t crc = crc32(body.data(), body.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(StatusCode::kIoError, "cannot write bundle: ", path);
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(body.data()),
            static_cast<std::streamsize>(body.size()));
  uint8_t crc_bytes[4];
  for (int i = 0; i < 4; ++i) crc_bytes[i] = static_cast<uint8_t>(crc >> (8 * i));
  out.write(reinterpret_cast<char*>(crc_bytes), 4);
  if (!out) fail(StatusCode::kIoError, "write failed: ", path);
}

TensorBundle TensorBundle::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(StatusCode::kIoError, "cannot open bundle: ", path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(StatusCode::kParseError, path, ": not a tensor bundle");
  size_t body_size = bytes.size() - 8;
  uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i)
    stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  uint32_t actual_crc = crc32(bytes.data() + 4, body_size);
  if (stored_crc != actual_crc)
    fail(StatusCode::kIoError, path, ": checksum mismatch (stored ",
         hex64(stored_crc), ", computed ", hex64(actual_crc), ")");

  Reader r(bytes.data() + 4, body_size, path);
  uint32_t version = r.u32();
  if (version != kVersion)
    fail(StatusCode::kParseError, path, ": unsupported bundle version ", version);
  uint32_t count = r.u32();
  TensorBundle bundle;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = r.u16();
    const uint8_t* name_bytes = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    Section s;
    s.dtype = static_cast<DType>(r.u8());
    uint8_t ndim = r.u8();
    uint64_t n = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      s.dims.push_back(r.u32());
      n *= s.dims.back();
    }
    size_t payload_size = n * element_size(s.dtype);
    const uint8_t* payload = r.take(payload_size);
    s.payload.assign(payload, payload + payload_size);
    bundle.sections_[name] = std::move(s);
  }
  return bundle;
}

}  // namespace mmtts
