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

#include "evalmetrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "binio.h"
#include "utf8.h"
#include "util.h"
#include "wav.h"

namespace mmtts {

namespace {
using nlohmann::json;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.provider_id != b.provider_id) {
    fail(StatusCode::kInvalidArgument, "embeddings from different providers: '", a.provider_id,
         "' vs '", b.provider_id, "'");
  }
  if (a.values.size() != b.values.size()) {
    fail(StatusCode::kInvalidArgument, "embedding dimensions differ: ", a.values.size(), " vs ",
         b.values.size());
  }
  if (a.values.empty()) fail(StatusCode::kInvalidArgument, "empty embedding");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) {
    fail(StatusCode::kInvalidArgument, "cosine similarity of a zero vector is undefined");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double character_error_rate(const std::string& reference, const std::string& hypothesis) {
  const std::vector<uint32_t> ref = utf8::normalize(utf8::decode(reference));
  const std::vector<uint32_t> hyp = utf8::normalize(utf8::decode(hypothesis));
  if (ref.empty()) {
    fail(StatusCode::kInvalidArgument, "character error rate needs a nonempty reference");
  }
  // Two-row Levenshtein with unit costs.
  const size_t n = ref.size(), m = hyp.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int subst = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

std::vector<EvalItem> parse_eval_items(const std::string& text) {
  std::vector<EvalItem> items;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::vector<std::string> fields = split(t, '|');
    if (fields.size() != 4) {
      fail(StatusCode::kParseError, "eval item line ", line_number, ": expected 4 |-fields, got ",
           fields.size());
    }
    EvalItem item;
    item.path = trim(fields[0]);
    item.speaker = trim(fields[1]);
    item.accent = trim(fields[2]);
    item.reference_text = trim(fields[3]);
    if (item.path.empty() || item.speaker.empty() || item.accent.empty() ||
        item.reference_text.empty()) {
      fail(StatusCode::kParseError, "eval item line ", line_number, ": empty field");
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::string format_eval_items(const std::vector<EvalItem>& items) {
  std::ostringstream os;
  os << "# path|speaker|accent|text\n";
  for (const EvalItem& item : items) {
    os << item.path << "|" << item.speaker << "|" << item.accent << "|" << item.reference_text
       << "\n";
  }
  return os.str();
}

namespace {

// Loads the mel matrix from either a wav file (computing features) or a mel
// bundle written by synthesis. Returns row-major n_mels x frames data.
void load_mel_any(const std::string& path, const FeatureConfig& config, std::vector<float>* data,
                  int* n_mels, int* frames) {
  if (ends_with(lowercase(path), ".wav")) {
    const Waveform wav = read_wav(path);
    FeatureConfig cfg = config;
    cfg.sample_rate = wav.sample_rate;
    const MelSpectrogram mel = mel_spectrogram(wav, cfg);
    *data = mel.values;
    *n_mels = mel.n_mels;
    *frames = mel.frames;
    return;
  }
  const TensorBundle bundle = TensorBundle::load(path);
  const std::vector<uint32_t>& dims = bundle.dims("mel");
  if (dims.size() != 2) fail(StatusCode::kParseError, path, ": mel section is not 2-D");
  *data = bundle.get_f32("mel");
  *n_mels = static_cast<int>(dims[0]);
  *frames = static_cast<int>(dims[1]);
}

class MelStatsEmbedding : public EmbeddingProvider {
 public:
  explicit MelStatsEmbedding(FeatureConfig config) : config_(config) {}
  std::string id() const override { return "mel-stats"; }

  EmbeddingVector embed(const std::string& path) const override {
    std::vector<float> data;
    int n_mels = 0, frames = 0;
    load_mel_any(path, config_, &data, &n_mels, &frames);
    if (frames < 1) fail(StatusCode::kInvalidArgument, path, ": no frames to embed");
    EmbeddingVector out;
    out.provider_id = id();
    out.values.resize(2 * static_cast<size_t>(n_mels));
    for (int c = 0; c < n_mels; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int f = 0; f < frames; ++f) {
        const double v = data[static_cast<size_t>(c) * frames + f];
        sum += v;
        sq += v * v;
      }
      const double mean = sum / frames;
      out.values[c] = mean;
      out.values[n_mels + c] = std::sqrt(std::max(0.0, sq / frames - mean * mean));
    }
    double norm = 0.0;
    for (double v : out.values) norm += v * v;
    if (norm == 0.0) fail(StatusCode::kInvalidArgument, path, ": embedding has zero norm");
    return out;
  }

 private:
  FeatureConfig config_;
};

class EchoTranscript : public TranscriptProvider {
 public:
  std::string id() const override { return "echo"; }
  std::string transcribe(const std::string&, const std::string& reference_text) const override {
    return reference_text;
  }
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

std::string run_command(const std::string& command, const std::string& path) {
  const std::string full = command + " " + shell_quote(path);
  FILE* pipe = popen(full.c_str(), "r");
  if (!pipe) fail(StatusCode::kIoError, "cannot spawn: ", full);
  std::string output;
  char buf[4096];
  size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
  const int status = pclose(pipe);
  if (status != 0) {
    fail(StatusCode::kIoError, "provider command failed (status ", status, "): ", full);
  }
  return output;
}

class CommandEmbedding : public EmbeddingProvider {
 public:
  CommandEmbedding(std::string command, std::string id)
      : command_(std::move(command)), id_(std::move(id)) {}
  std::string id() const override { return id_; }

  EmbeddingVector embed(const std::string& path) const override {
    const std::string output = run_command(command_, path);
    EmbeddingVector out;
    out.provider_id = id_;
    std::istringstream in(output);
    double v;
    while (in >> v) out.values.push_back(v);
    if (out.values.empty()) {
      fail(StatusCode::kParseError, "provider '", id_, "' returned no numbers for ", path);
    }
    return out;
  }

 private:
  std::string command_, id_;
};

class CommandTranscript : public TranscriptProvider {
 public:
  CommandTranscript(std::string command, std::string id)
      : command_(std::move(command)), id_(std::move(id)) {}
  std::string id() const override { return id_; }

  std::string transcribe(const std::string& path, const std::string&) const override {
    std::string output = run_command(command_, path);
    while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) output.pop_back();
    return output;
  }

 private:
  std::string command_, id_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_mel_stats_embedding(const FeatureConfig& config) {
  return std::make_unique<MelStatsEmbedding>(config);
}

std::unique_ptr<TranscriptProvider> make_echo_transcript() {
  return std::make_unique<EchoTranscript>();
}

std::unique_ptr<EmbeddingProvider> make_command_embedding(const std::string& command,
                                                          const std::string& id) {
  return std::make_unique<CommandEmbedding>(command, id);
}

std::unique_ptr<TranscriptProvider> make_command_transcript(const std::string& command,
                                                            const std::string& id) {
  return std::make_unique<CommandTranscript>(command, id);
}

std::map<std::string, EmbeddingVector> reference_embeddings(const DatasetManifest& manifest,
                                                            const EmbeddingProvider& embedder) {
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, int> counts;
  for (const UtteranceRecord& rec : manifest.records) {
    EmbeddingVector e;
    try {
      e = embedder.embed(rec.audio_path);
    } catch (const Error&) {
      continue;
    }
    const std::string& name = manifest.speaker_names[rec.speaker_id];
    std::vector<double>& sum = sums[name];
    if (sum.empty()) sum.assign(e.values.size(), 0.0);
    if (sum.size() != e.values.size()) {
      fail(StatusCode::kInternal, "provider returned inconsistent dimensions for speaker ", name);
    }
    for (size_t i = 0; i < sum.size(); ++i) sum[i] += e.values[i];
    counts[name] += 1;
  }
  std::map<std::string, EmbeddingVector> out;
  for (const auto& [name, sum] : sums) {
    EmbeddingVector e;
    e.provider_id = embedder.id();
    e.values = sum;
    for (double& v : e.values) v /= counts[name];
    out[name] = std::move(e);
  }
  return out;
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / s.n;
  if (s.n >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / (s.n - 1));
    s.halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

}  // namespace

TransferReport evaluate_transfer(const std::vector<EvalItem>& items,
                                 const std::map<std::string, EmbeddingVector>& references,
                                 const EmbeddingProvider& embedder,
                                 const TranscriptProvider& transcriber) {
  if (items.empty()) fail(StatusCode::kInvalidArgument, "no items to evaluate");

  TransferReport report;
  report.embedding_provider = embedder.id();
  report.transcript_provider = transcriber.id();

  struct CellAccum {
    int n = 0;
    double cosine = 0.0, cer = 0.0;
  };
  std::map<std::pair<std::string, std::string>, CellAccum> cells;
  std::vector<double> cosines, cers;

  // Sort a copy so every aggregate is independent of input order.
  std::vector<EvalItem> sorted = items;
  std::sort(sorted.begin(), sorted.end(), [](const EvalItem& a, const EvalItem& b) {
    return std::tie(a.speaker, a.accent, a.path) < std::tie(b.speaker, b.accent, b.path);
  });

  for (const EvalItem& item : sorted) {
    const auto ref = references.find(item.speaker);
    if (ref == references.end()) {
      report.skipped += 1;
      report.skip_reasons.push_back(item.path + ": no reference embedding for speaker '" +
                                    item.speaker + "'");
      continue;
    }
    double cos, cer;
    try {
      const EmbeddingVector e = embedder.embed(item.path);
      cos = cosine_similarity(e, ref->second);
      const std::string transcript = transcriber.transcribe(item.path, item.reference_text);
      cer = character_error_rate(item.reference_text, transcript);
    } catch (const Error& e) {
      report.skipped += 1;
      report.skip_reasons.push_back(item.path + ": " + e.what());
      continue;
    }
    report.evaluated += 1;
    cosines.push_back(cos);
    cers.push_back(cer);
    CellAccum& cell = cells[{item.speaker, item.accent}];
    cell.n += 1;
    cell.cosine += cos;
    cell.cer += cer;
  }

  if (report.evaluated == 0) {
    fail(StatusCode::kInvalidArgument, "every item failed evaluation (", report.skipped,
         " skipped); first: ",
         report.skip_reasons.empty() ? "unknown" : report.skip_reasons.front());
  }

  for (const auto& [key, acc] : cells) {
    TransferCell cell;
    cell.speaker = key.first;
    cell.accent = key.second;
    cell.count = acc.n;
    cell.mean_cosine = acc.cosine / acc.n;
    cell.mean_cer = acc.cer / acc.n;
    report.cells.push_back(std::move(cell));
  }
  report.cosine = summarize(cosines);
  report.cer = summarize(cers);
  return report;
}

std::string TransferReport::to_json() const {
  json j;
  j["embedding_provider"] = embedding_provider;
  j["transcript_provider"] = transcript_provider;
  j["evaluated"] = evaluated;
  j["skipped"] = skipped;
  j["skip_reasons"] = skip_reasons;
  j["overall"]["cosine_sim"] = {{"mean", cosine.mean}, {"halfwidth", cosine.halfwidth},
                                {"n", cosine.n}};
  j["overall"]["cer"] = {{"mean", cer.mean}, {"halfwidth", cer.halfwidth}, {"n", cer.n}};
  j["cells"] = json::array();
  for (const TransferCell& cell : cells) {
    j["cells"].push_back({{"speaker", cell.speaker},
                          {"accent", cell.accent},
                          {"n", cell.count},
                          {"cosine_sim", cell.mean_cosine},
                          {"cer", cell.mean_cer}});
  }
  return j.dump(2);
}

std::string TransferReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "speaker" << std::setw(16) << "accent" << std::right
     << std::setw(6) << "n" << std::setw(14) << "cosine_sim" << std::setw(10) << "cer" << "\n";
  os << std::string(62, '-') << "\n";
  os << std::fixed << std::setprecision(4);
  for (const TransferCell& cell : cells) {
    os << std::left << std::setw(16) << cell.speaker << std::setw(16) << cell.accent << std::right
       << std::setw(6) << cell.count << std::setw(14) << cell.mean_cosine << std::setw(10)
       << cell.mean_cer << "\n";
  }
  os << std::string(62, '-') << "\n";
  os << "overall cosine_sim " << cosine.mean << " +/- " << cosine.halfwidth << " (n=" << cosine.n
     << ")\n";
  os << "overall cer        " << cer.mean << " +/- " << cer.halfwidth << " (n=" << cer.n << ")\n";
  if (skipped > 0) os << "skipped " << skipped << " item(s)\n";
  return os.str();
}

}  // namespace mmtts
