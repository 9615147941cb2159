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

#include "utf8.h"

#include <algorithm>
#include <map>
#include <utility>

#include "util.h"

namespace mmtts::utf8 {

std::vector<uint32_t> decode(const std::string& s) {
  std::vector<uint32_t> out;
  size_t i = 0;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  while (i < s.size()) {
    uint8_t b = bytes[i];
    uint32_t cp = 0;
    int extra = 0;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xe0) == 0xc0) {
      cp = b & 0x1f;
      extra = 1;
    } else if ((b & 0xf0) == 0xe0) {
      cp = b & 0x0f;
      extra = 2;
    } else if ((b & 0xf8) == 0xf0) {
      cp = b & 0x07;
      extra = 3;
    } else {
      fail(StatusCode::kParseError, "invalid UTF-8 lead byte at offset ", i);
    }
    if (extra > 0 && i + extra >= s.size())
      fail(StatusCode::kParseError, "truncated UTF-8 sequence at offset ", i);
    for (int k = 1; k <= extra; ++k) {
      uint8_t c = bytes[i + k];
      if ((c & 0xc0) != 0x80)
        fail(StatusCode::kParseError, "invalid UTF-8 continuation at offset ", i + k);
      cp = (cp << 6) | (c & 0x3f);
    }
    if (extra == 1 && cp < 0x80) fail(StatusCode::kParseError, "overlong UTF-8 at offset ", i);
    if (extra == 2 && cp < 0x800) fail(StatusCode::kParseError, "overlong UTF-8 at offset ", i);
    if (extra == 3 && cp < 0x10000) fail(StatusCode::kParseError, "overlong UTF-8 at offset ", i);
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
      fail(StatusCode::kParseError, "invalid codepoint at offset ", i);
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

std::string encode_one(uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
  return out;
}

std::string encode(const std::vector<uint32_t>& codepoints) {
  std::string out;
  for (uint32_t cp : codepoints) out += encode_one(cp);
  return out;
}

namespace {

// Canonical decompositions for precomposed Latin letters that show up in
// IPA-adjacent text: base letter + one combining mark.
struct Decomposition {
  uint32_t composed;
  uint32_t base;
  uint32_t mark;
};

// U+0300 grave, U+0301 acute, U+0302 circumflex, U+0303 tilde, U+0304 macron,
// U+0306 breve, U+0308 diaeresis, U+030A ring, U+030C caron, U+0327 cedilla.
const Decomposition kDecompositions[] = {
    {0x00c0, 'A', 0x0300}, {0x00c1, 'A', 0x0301}, {0x00c2, 'A', 0x0302},
    {0x00c3, 'A', 0x0303}, {0x00c4, 'A', 0x0308}, {0x00c5, 'A', 0x030a},
    {0x00c7, 'C', 0x0327}, {0x00c8, 'E', 0x0300}, {0x00c9, 'E', 0x0301},
    {0x00ca, 'E', 0x0302}, {0x00cb, 'E', 0x0308}, {0x00cc, 'I', 0x0300},
    {0x00cd, 'I', 0x0301}, {0x00ce, 'I', 0x0302}, {0x00cf, 'I', 0x0308},
    {0x00d1, 'N', 0x0303}, {0x00d2, 'O', 0x0300}, {0x00d3, 'O', 0x0301},
    {0x00d4, 'O', 0x0302}, {0x00d5, 'O', 0x0303}, {0x00d6, 'O', 0x0308},
    {0x00d9, 'U', 0x0300}, {0x00da, 'U', 0x0301}, {0x00db, 'U', 0x0302},
    {0x00dc, 'U', 0x0308}, {0x00dd, 'Y', 0x0301},
    {0x00e0, 'a', 0x0300}, {0x00e1, 'a', 0x0301}, {0x00e2, 'a', 0x0302},
    {0x00e3, 'a', 0x0303}, {0x00e4, 'a', 0x0308}, {0x00e5, 'a', 0x030a},
    {0x00e7, 'c', 0x0327}, {0x00e8, 'e', 0x0300}, {0x00e9, 'e', 0x0301},
    {0x00ea, 'e', 0x0302}, {0x00eb, 'e', 0x0308}, {0x00ec, 'i', 0x0300},
    {0x00ed, 'i', 0x0301}, {0x00ee, 'i', 0x0302}, {0x00ef, 'i', 0x0308},
    {0x00f1, 'n', 0x0303}, {0x00f2, 'o', 0x0300}, {0x00f3, 'o', 0x0301},
    {0x00f4, 'o', 0x0302}, {0x00f5, 'o', 0x0303}, {0x00f6, 'o', 0x0308},
    {0x00f9, 'u', 0x0300}, {0x00fa, 'u', 0x0301}, {0x00fb, 'u', 0x0302},
    {0x00fc, 'u', 0x0308}, {0x00fd, 'y', 0x0301}, {0x00ff, 'y', 0x0308},
    {0x0100, 'A', 0x0304}, {0x0101, 'a', 0x0304}, {0x0102, 'A', 0x0306},
    {0x0103, 'a', 0x0306}, {0x0112, 'E', 0x0304}, {0x0113, 'e', 0x0304},
    {0x011a, 'E', 0x030c}, {0x011b, 'e', 0x030c}, {0x012a, 'I', 0x0304},
    {0x012b, 'i', 0x0304}, {0x014c, 'O', 0x0304}, {0x014d, 'o', 0x0304},
    {0x0152, 0x0152, 0},   // OE ligature: no decomposition, listed for clarity
    {0x0160, 'S', 0x030c}, {0x0161, 's', 0x030c}, {0x016a, 'U', 0x0304},
    {0x016b, 'u', 0x0304}, {0x017d, 'Z', 0x030c}, {0x017e, 'z', 0x030c},
    {0x00e6, 0x00e6, 0},   // ae ligature: atomic in IPA
    {0x1ebd, 'e', 0x0303}, {0x0129, 'i', 0x0303}, {0x0169, 'u', 0x0303},
    {0x1ef9, 'y', 0x0303}, {0x1e7d, 'v', 0x0303},
};

const std::map<uint32_t, std::pair<uint32_t, uint32_t>>& decomposition_map() {
  static const auto* m = [] {
    auto* mm = new std::map<uint32_t, std::pair<uint32_t, uint32_t>>();
    for (const auto& d : kDecompositions) {
      if (d.mark != 0) (*mm)[d.composed] = {d.base, d.mark};
    }
    return mm;
  }();
  return *m;
}

const std::map<std::pair<uint32_t, uint32_t>, uint32_t>& composition_map() {
  static const auto* m = [] {
    auto* mm = new std::map<std::pair<uint32_t, uint32_t>, uint32_t>();
    for (const auto& d : kDecompositions) {
      if (d.mark != 0) (*mm)[{d.base, d.mark}] = d.composed;
    }
    return mm;
  }();
  return *m;
}

}  // namespace

int combining_class(uint32_t cp) {
  // Curated combining classes: 230 above, 220 below, 202 attached below.
  if (cp == 0x0327 || cp == 0x0328) return 202;
  if ((cp >= 0x0316 && cp <= 0x0319) || cp == 0x031c || cp == 0x031d ||
      cp == 0x031e || cp == 0x031f || cp == 0x0320 || cp == 0x0324 ||
      cp == 0x0325 || cp == 0x0329 || cp == 0x032a || cp == 0x032c ||
      cp == 0x032f || cp == 0x0330 || cp == 0x0339 || cp == 0x033a ||
      cp == 0x033b || cp == 0x033c)
    return 220;
  if (is_tie_bar(cp)) return 233;
  if (cp >= 0x0300 && cp <= 0x036f) return 230;
  if (cp >= 0x1dc0 && cp <= 0x1dff) return 230;
  return 0;
}

bool is_combining_mark(uint32_t cp) {
  return (cp >= 0x0300 && cp <= 0x036f) || (cp >= 0x1dc0 && cp <= 0x1dff);
}

bool is_modifier_letter(uint32_t cp) {
  // Spacing modifiers commonly used in IPA: aspiration, labialization,
  // palatalization, length marks, stress marks excluded (stress is prosodic
  // but still attaches poorly; keep primary/secondary stress as standalone).
  if (cp == 0x02c8 || cp == 0x02cc) return false;  // stress marks stand alone
  return (cp >= 0x02b0 && cp <= 0x02ff) || cp == 0x02d0 || cp == 0x02d1;
}

bool is_tie_bar(uint32_t cp) { return cp == 0x0361 || cp == 0x035c; }

std::vector<uint32_t> normalize(const std::vector<uint32_t>& codepoints) {
  // Decompose.
  std::vector<uint32_t> decomposed;
  decomposed.reserve(codepoints.size());
  const auto& dmap = decomposition_map();
  for (uint32_t cp : codepoints) {
    auto it = dmap.find(cp);
    if (it != dmap.end()) {
      decomposed.push_back(it->second.first);
      decomposed.push_back(it->second.second);
    } else {
      decomposed.push_back(cp);
    }
  }
  // Canonical ordering: stable-sort runs of nonzero combining class.
  size_t i = 0;
  while (i < decomposed.size()) {
    if (combining_class(decomposed[i]) == 0) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < decomposed.size() && combining_class(decomposed[j]) != 0) ++j;
    std::stable_sort(decomposed.begin() + i, decomposed.begin() + j,
                     [](uint32_t a, uint32_t b) {
                       return combining_class(a) < combining_class(b);
                     });
    i = j;
  }
  // Recompose canonical pairs.
  const auto& cmap = composition_map();
  std::vector<uint32_t> out;
  out.reserve(decomposed.size());
  for (uint32_t cp : decomposed) {
    if (!out.empty() && is_combining_mark(cp)) {
      auto it = cmap.find({out.back(), cp});
      if (it != cmap.end()) {
        out.back() = it->second;
        continue;
      }
    }
    out.push_back(cp);
  }
  return out;
}

std::string normalize(const std::string& s) { return encode(normalize(decode(s))); }

}  // namespace mmtts::utf8
