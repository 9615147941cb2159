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

#ifndef MMTTS_SRC_BINIO_H_
#define MMTTS_SRC_BINIO_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmtts {

// Little-endian binary bundle of named arrays with a trailing CRC32.
// Layout: magic "MMTB" | u32 version | u32 section count | sections | u32 crc,
// where each section is u16 name length | name bytes | u8 dtype | u8 ndim |
// u32 dims[ndim] | payload. The CRC covers everything between the version
// field and the checksum itself, so any byte flip is detected on load.
class TensorBundle {
 public:
  static constexpr uint32_t kVersion = 1;

  void put_f32(const std::string& name, std::vector<uint32_t> dims,
               const std::vector<float>& data);
  void put_f64(const std::string& name, std::vector<uint32_t> dims,
               const std::vector<double>& data);
  void put_i32(const std::string& name, const std::vector<int32_t>& data);
  void put_bytes(const std::string& name, const std::string& data);

  bool has(const std::string& name) const;
  std::vector<std::string> names() const;
  const std::vector<uint32_t>& dims(const std::string& name) const;
  std::vector<float> get_f32(const std::string& name) const;
  std::vector<double> get_f64(const std::string& name) const;
  std::vector<int32_t> get_i32(const std::string& name) const;
  std::string get_bytes(const std::string& name) const;

  void save(const std::string& path) const;
  static TensorBundle load(const std::string& path);

 private:
  enum DType : uint8_t { kF32 = 0, kI32 = 1, kBytes = 2, kF64 = 3 };
  struct Section {
    DType dtype;
    std::vector<uint32_t> dims;
    std::vector<uint8_t> payload;
  };
  const Section& section(const std::string& name, DType expected) const;
  std::map<std::string, Section> sections_;
};

}  // namespace mmtts

#endif  // MMTTS_SRC_BINIO_H_
