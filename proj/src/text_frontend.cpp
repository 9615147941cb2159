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

#include "text_frontend.h"

#include <algorithm>
#include <cctype>

#include "manifest.h"
#include "utf8.h"
#include "util.h"

namespace mmtts {

namespace {

const char* kDefaultPunctuation[] = {".", ",", "!", "?", ";", ":", "'", "-", "(", ")"};

bool is_space_cp(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x00a0;
}

bool is_ascii_punct(uint32_t cp) {
  return cp < 0x80 && std::ispunct(static_cast<int>(cp));
}

}  // namespace

PhonemeInventory::PhonemeInventory() {
  add_symbol(kPadSymbol);
  add_symbol(" ");
  for (const char* p : kDefaultPunctuation) add_symbol(p);
}

void PhonemeInventory::add_symbol(const std::string& symbol) {
  if (symbol.empty())
    fail(StatusCode::kInvalidArgument, "inventory symbol must be nonempty");
  if (index_.count(symbol)) return;
  index_[symbol] = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
}

bool PhonemeInventory::contains(const std::string& symbol) const {
  return index_.count(symbol) != 0;
}

int PhonemeInventory::id_of(const std::string& symbol) const {
  auto it = index_.find(symbol);
  return it == index_.end() ? -1 : it->second;
}

const std::string& PhonemeInventory::symbol(int id) const {
  if (id < 0 || id >= size())
    fail(StatusCode::kInvalidArgument, "token id ", id, " out of range [0, ", size(), ")");
  return symbols_[id];
}

uint64_t PhonemeInventory::hash() const { return fnv1a64(serialize()); }

std::string PhonemeInventory::serialize() const {
  std::string out;
  for (const auto& s : symbols_) {
    out += s;
    out += '\n';
  }
  return out;
}

PhonemeInventory PhonemeInventory::deserialize(const std::string& text) {
  PhonemeInventory inv;
  inv.symbols_.clear();
  inv.index_.clear();
  std::string line;
  size_t start = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) line = text.substr(start);
      else break;
      start = text.size() + 1;
    } else {
      line = text.substr(start, nl - start);
      start = nl + 1;
    }
    if (inv.index_.count(line))
      fail(StatusCode::kParseError, "inventory has duplicate symbol at line ",
           inv.symbols_.size() + 1);
    if (line.empty())
      fail(StatusCode::kParseError, "inventory has empty symbol at line ",
           inv.symbols_.size() + 1);
    inv.index_[line] = static_cast<int>(inv.symbols_.size());
    inv.symbols_.push_back(line);
  }
  if (inv.symbols_.empty() || inv.symbols_[0] != kPadSymbol)
    fail(StatusCode::kParseError, "inventory must reserve line 0 for ", kPadSymbol);
  return inv;
}

void PhonemeInventory::save(const std::string& path) const {
  write_text_file(path, serialize());
}

PhonemeInventory PhonemeInventory::load_file(const std::string& path) {
  return deserialize(read_text_file(path));
}

std::vector<std::string> segment_ipa(const std::string& text) {
  auto cps = utf8::normalize(utf8::decode(text));
  std::vector<std::string> segments;
  size_t i = 0;
  while (i < cps.size()) {
    uint32_t cp = cps[i];
    if (is_space_cp(cp)) {
      // Collapse runs of whitespace into one space segment.
      while (i < cps.size() && is_space_cp(cps[i])) ++i;
      segments.push_back(" ");
      continue;
    }
    if (is_ascii_punct(cp)) {
      segments.push_back(utf8::encode_one(cp));
      ++i;
      continue;
    }
    // Base codepoint plus its attachments; a tie bar pulls in the next base.
    std::vector<uint32_t> seg{cp};
    ++i;
    bool join_next = false;
    while (i < cps.size()) {
      if (utf8::is_combining_mark(cps[i])) {
        join_next = utf8::is_tie_bar(cps[i]);
        seg.push_back(cps[i]);
        ++i;
        continue;
      }
      if (utf8::is_modifier_letter(cps[i])) {
        seg.push_back(cps[i]);
        ++i;
        continue;
      }
      if (join_next && !is_space_cp(cps[i]) && !is_ascii_punct(cps[i])) {
        seg.push_back(cps[i]);
        ++i;
        join_next = false;
        continue;
      }
      break;
    }
    segments.push_back(utf8::encode(seg));
  }
  return segments;
}

PhonemeInventory PhonemeInventory::build(
    const std::vector<const DatasetManifest*>& manifests) {
  PhonemeInventory inv;
  for (const DatasetManifest* manifest : manifests) {
    for (const auto& record : manifest->records) {
      for (const auto& segment : segment_ipa(record.ipa_text)) inv.add_symbol(segment);
    }
  }
  return inv;
}

TokenSequence tokenize_ipa(const std::string& text, const PhonemeInventory& inventory) {
  std::string normalized = utf8::normalize(text);
  if (trim(normalized).empty())
    fail(StatusCode::kInvalidArgument, "tokenize: text is empty after normalization");

  // Candidate symbols sorted by byte length (desc), then table order, giving
  // deterministic longest-match segmentation.
  std::vector<int> order(inventory.size());
  for (int i = 0; i < inventory.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return inventory.symbol(a).size() > inventory.symbol(b).size();
  });

  TokenSequence seq;
  seq.source_text = normalized;
  size_t pos = 0;
  while (pos < normalized.size()) {
    // Whitespace run -> single space token.
    if (is_space_cp(static_cast<unsigned char>(normalized[pos])) &&
        static_cast<unsigned char>(normalized[pos]) < 0x80) {
      while (pos < normalized.size() &&
             static_cast<unsigned char>(normalized[pos]) < 0x80 &&
             is_space_cp(static_cast<unsigned char>(normalized[pos]))) {
        ++pos;
      }
      seq.ids.push_back(inventory.id_of(" "));
      continue;
    }
    int matched = -1;
    for (int id : order) {
      if (id == PhonemeInventory::kPadId) continue;
      const std::string& sym = inventory.symbol(id);
      if (normalized.compare(pos, sym.size(), sym) == 0) {
        matched = id;
        break;
      }
    }
    if (matched < 0) {
      auto rest = utf8::decode(normalized.substr(pos));
      fail(StatusCode::kInvalidArgument, "tokenize: unknown segment at byte offset ", pos,
           " (codepoint U+", hex64(rest.empty() ? 0 : rest[0]).substr(12), ")");
    }
    seq.ids.push_back(matched);
    pos += inventory.symbol(matched).size();
  }
  if (seq.ids.empty())
    fail(StatusCode::kInvalidArgument, "tokenize: produced no tokens");
  return seq;
}

std::string detokenize(const TokenSequence& tokens, const PhonemeInventory& inventory) {
  std::string out;
  for (int id : tokens.ids) out += inventory.symbol(id);
  return out;
}

}  // namespace mmtts
