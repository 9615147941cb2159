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

#ifndef MMTTS_SRC_TEXT_FRONTEND_H_
#define MMTTS_SRC_TEXT_FRONTEND_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmtts {

struct DatasetManifest;

// One token inventory shared by every language: IPA segments, a pad token at
// index 0, a space token, and punctuation. There is deliberately no
// per-language partition, so the same segment always maps to the same id no
// matter which language an utterance belongs to.
class PhonemeInventory {
 public:
  static constexpr const char* kPadSymbol = "<pad>";
  static constexpr int kPadId = 0;

  // Inventory of special tokens only (pad, space, default punctuation).
  PhonemeInventory();

  // Union of IPA segments seen across all manifests plus the specials.
  // Symbols are added in first-appearance order after specials.
  static PhonemeInventory build(const std::vector<const DatasetManifest*>& manifests);

  void add_symbol(const std::string& symbol);
  bool contains(const std::string& symbol) const;
  int id_of(const std::string& symbol) const;  // -1 when absent
  const std::string& symbol(int id) const;
  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  uint64_t hash() const;

  // One symbol per line, line number = id. Lines are written verbatim, so a
  // space symbol is a line holding one space.
  std::string serialize() const;
  static PhonemeInventory deserialize(const std::string& text);
  void save(const std::string& path) const;
  static PhonemeInventory load_file(const std::string& path);

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  std::string source_text;  // normalized form of the input

  int length() const { return static_cast<int>(ids.size()); }
};

// Greedy longest-match segmentation over inventory symbols after NFC
// normalization; multi-codepoint segments win over their prefixes, ties on
// length resolve by table order. Whitespace collapses to the space token.
// An uncovered segment is an error naming the codepoint and byte offset.
TokenSequence tokenize_ipa(const std::string& text, const PhonemeInventory& inventory);

// Concatenation of symbols; inverse of tokenize_ipa on normalized input.
std::string detokenize(const TokenSequence& tokens, const PhonemeInventory& inventory);

// Splits normalized IPA text into segments: base codepoint plus attached
// combining marks and modifier letters, with tie bars joining the following
// cluster (affricates). Used for inventory building; tokenize_ipa itself
// matches against the inventory.
std::vector<std::string> segment_ipa(const std::string& text);

}  // namespace mmtts

#endif  // MMTTS_SRC_TEXT_FRONTEND_H_
