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

#ifndef MMTTS_SRC_UTIL_H_
#define MMTTS_SRC_UTIL_H_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmtts {

enum class StatusCode {
  kOk = 0,
  kInvalidArgument = 1,
  kParseError = 2,
  kNotFound = 3,
  kIoError = 4,
  kNumericError = 5,
  kInternal = 6,
};

const char* status_code_name(StatusCode code);

// All recoverable failures in the core are reported as Error; the C API
// boundary translates them into status codes + a last-error message.
class Error : public std::runtime_error {
 public:
  Error(StatusCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  StatusCode code() const { return code_; }

 private:
  StatusCode code_;
};

template <typename... Args>
[[noreturn]] void fail(StatusCode code, Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(code, os.str());
}

std::string trim(const std::string& s);
// Splits on a single delimiter, keeping empty fields.
std::vector<std::string> split(const std::string& s, char delim);
std::string lowercase(const std::string& s);
bool starts_with(const std::string& s, const std::string& prefix);
bool ends_with(const std::string& s, const std::string& suffix);

uint64_t fnv1a64(const void* data, size_t size);
uint64_t fnv1a64(const std::string& s);
uint32_t crc32(const void* data, size_t size, uint32_t seed = 0);
std::string hex64(uint64_t v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mmtts

#endif  // MMTTS_SRC_UTIL_H_
