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

#ifndef MMTTS_SRC_EVALMETRICS_H_
#define MMTTS_SRC_EVALMETRICS_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "acoustic_features.h"
#include "manifest.h"

namespace mmtts {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;
};

// a.b / (||a|| ||b||). Errors on dimension/provider mismatch or zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Unit-cost Levenshtein distance over NFC-normalized Unicode scalar values,
// divided by the reference length. Errors on an empty reference.
double character_error_rate(const std::string& reference, const std::string& hypothesis);

// One synthesized sample to score: where it lives on disk, which real
// speaker's voice it claims, which accent it was rendered with, and the text
// that was requested.
struct EvalItem {
  std::string path;
  std::string speaker;
  std::string accent;
  std::string reference_text;
};

// Lines of "path|speaker|accent|text"; # comments and blank lines skipped.
std::vector<EvalItem> parse_eval_items(const std::string& text);
std::string format_eval_items(const std::vector<EvalItem>& items);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  // Embeds the sample at `path` (wav or mel bundle). Throws Error on failure.
  virtual EmbeddingVector embed(const std::string& path) const = 0;
};

class TranscriptProvider {
 public:
  virtual ~TranscriptProvider() = default;
  virtual std::string id() const = 0;
  // Returns a transcript for the sample. `reference_text` is available so the
  // hermetic echo provider can close the loop without a recognizer.
  virtual std::string transcribe(const std::string& path,
                                 const std::string& reference_text) const = 0;
};

// Per-mel-channel mean and standard deviation, stacked: a 2*n_mels vector.
// Reads wav files (features computed with `config`) and mel bundles.
std::unique_ptr<EmbeddingProvider> make_mel_stats_embedding(const FeatureConfig& config);

// Returns the reference text verbatim; CER is then 0 by construction.
std::unique_ptr<TranscriptProvider> make_echo_transcript();

// Adapters around external tools: one process invocation per item, the
// sample path appended as the last argument, result read from stdout.
// Embedding output: whitespace-separated numbers. Transcript output: UTF-8
// text, trailing newline stripped.
std::unique_ptr<EmbeddingProvider> make_command_embedding(const std::string& command,
                                                          const std::string& id);
std::unique_ptr<TranscriptProvider> make_command_transcript(const std::string& command,
                                                            const std::string& id);

// Mean embedding over every utterance a speaker has in the manifest.
// Speakers whose utterances all fail to embed are left out of the map.
std::map<std::string, EmbeddingVector> reference_embeddings(const DatasetManifest& manifest,
                                                            const EmbeddingProvider& embedder);

struct TransferCell {
  std::string speaker;
  std::string accent;
  int count = 0;
  double mean_cosine = 0.0;
  double mean_cer = 0.0;
};

struct MetricSummary {
  int n = 0;
  double mean = 0.0;
  double halfwidth = 0.0;  // 1.96 * s / sqrt(n); 0 when n < 2
};

struct TransferReport {
  std::vector<TransferCell> cells;  // sorted by (speaker, accent)
  MetricSummary cosine;
  MetricSummary cer;
  int evaluated = 0;
  int skipped = 0;
  std::vector<std::string> skip_reasons;  // "path: reason" per skipped item
  std::string embedding_provider;
  std::string transcript_provider;

  std::string to_json() const;
  std::string to_table() const;
};

// Scores every item against its speaker's reference embedding and the
// requested text. Items whose provider calls fail, or whose speaker has no
// reference embedding, are skipped and counted; all items failing is an
// error. The report is independent of input order.
TransferReport evaluate_transfer(const std::vector<EvalItem>& items,
                                 const std::map<std::string, EmbeddingVector>& references,
                                 const EmbeddingProvider& embedder,
                                 const TranscriptProvider& transcriber);

}  // namespace mmtts

#endif  // MMTTS_SRC_EVALMETRICS_H_
