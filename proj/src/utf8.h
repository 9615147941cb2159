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

#ifndef MMTTS_SRC_UTF8_H_
#define MMTTS_SRC_UTF8_H_

#include <cstdint>
#include <string>
#include <vector>

namespace mmtts::utf8 {

// Decodes a UTF-8 string into Unicode scalar values. Invalid byte sequences
// raise a parse error naming the byte offset.
std::vector<uint32_t> decode(const std::string& s);
std::string encode(const std::vector<uint32_t>& codepoints);
std::string encode_one(uint32_t codepoint);

// Canonical (NFC-style) normalization over a curated repertoire of
// precomposed Latin letters and IPA combining marks: decompose, reorder
// combining marks by combining class, then recompose canonical pairs.
// Codepoints outside the table pass through unchanged, which covers the IPA
// transcriptions this toolkit ingests.
std::vector<uint32_t> normalize(const std::vector<uint32_t>& codepoints);
std::string normalize(const std::string& s);

// Combining class per the curated table; 0 means starter.
int combining_class(uint32_t codepoint);
bool is_combining_mark(uint32_t codepoint);
// Spacing modifier letters (e.g. aspiration) attach to the previous segment.
bool is_modifier_letter(uint32_t codepoint);
// Tie bars join the next base character into the same segment (affricates).
bool is_tie_bar(uint32_t codepoint);

}  // namespace mmtts::utf8

#endif  // MMTTS_SRC_UTF8_H_
