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

#ifndef MMTTS_SRC_MODEL_H_
#define MMTTS_SRC_MODEL_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autodiff.h"
#include "config.h"
#include "feature_cache.h"
#include "text_frontend.h"

namespace mmtts {

// Per-frame conditioning for the flow decoder: named row blocks stacked
// vertically. RT mode carries [phi, accent, speaker]; RM mode appends
// [f0, voicing, energy].
struct ConditioningContext {
  Eigen::MatrixXd values;                            // ctx_dim x frames
  std::vector<std::pair<std::string, int>> blocks;   // (name, rows) in order
  int frames() const { return static_cast<int>(values.cols()); }
};

// Everything a trained model needs to run: hyperparameters, label spaces,
// the phoneme inventory, corpus statistics, and the parameter tensors.
struct ModelState {
  ToolkitConfig config;
  PhonemeInventory inventory;
  std::vector<std::string> speaker_names;
  std::vector<std::string> accent_names;
  std::vector<std::string> language_names;
  CorpusStats stats;
  ParamStore params;

  int n_speakers() const { return static_cast<int>(speaker_names.size()); }
  int n_accents() const { return static_cast<int>(accent_names.size()); }
  int ctx_dim() const;
};

ModelState init_model(const ToolkitConfig& config, const PhonemeInventory& inventory,
                      std::vector<std::string> speaker_names,
                      std::vector<std::string> accent_names,
                      std::vector<std::string> language_names, CorpusStats stats);

// --- Plain (tape-free) forward paths, used at synthesis and as oracles ---

// Accent-conditioned text encoding, C_txt x T.
Eigen::MatrixXd encode_text(const ModelState& state, const std::vector<int>& token_ids,
                            int accent_id);

// Column t repeated durations[t] times; total columns = sum(durations).
Eigen::MatrixXd expand_by_durations(const Eigen::MatrixXd& phi, const std::vector<int>& durations);

struct AttributePrediction {
  std::vector<int> durations;      // per token, >= 1
  std::vector<double> log_durations;  // raw predictor output
  std::vector<double> f0_norm;     // per frame (standardized when configured)
  std::vector<double> energy_norm; // per frame (corpus-standardized)
};

AttributePrediction predict_attributes(const ModelState& state, const Eigen::MatrixXd& phi,
                                       int accent_id, int speaker_id);

ConditioningContext build_context(const ModelState& state, const Eigen::MatrixXd& phi_frames,
                                  int accent_id, int speaker_id,
                                  const std::vector<double>* f0_norm,
                                  const std::vector<double>* voicing,
                                  const std::vector<double>* energy_norm);

struct FlowEval {
  Eigen::MatrixXd z;
  double logdet = 0.0;  // summed over channels and frames
  double nll = 0.0;     // (0.5 ||z||^2 + D/2 log 2pi - logdet) / D
};

FlowEval flow_forward_nll(const ModelState& state, const Eigen::MatrixXd& mel,
                          const ConditioningContext& ctx);
Eigen::MatrixXd flow_inverse(const ModelState& state, const Eigen::MatrixXd& z,
                             const ConditioningContext& ctx);

struct SynthesisRequest {
  std::string ipa_text;
  int speaker_id = -1;
  int accent_id = -1;
  std::string mode;  // "rt" or "rm"; empty means the trained mode
  double sigma = 0.0;
  uint64_t seed = 0;
};

struct SynthesisResult {
  MelSpectrogram mel;
  std::vector<int> durations;
  std::vector<double> f0_hz;     // de-standardized with the target stats (RM)
  std::vector<double> energy;    // de-standardized corpus energy (RM)
  std::vector<int> token_ids;
};

SynthesisResult synthesize(const ModelState& state, const SynthesisRequest& request);

// --- Training ---

struct BatchGraph {
  Tape tape;
  Var total;
  std::map<std::string, Var> param_vars;
  std::map<std::string, double> terms;  // per-term means over the batch
  Eigen::MatrixXd r_abs;                // |R^{AS}| of this batch (value only)
};

// Builds the full training graph for one batch. prior_weight scales the
// beta-binomial alignment log-prior (annealed to 0 over training).
void build_batch_graph(const ModelState& state, const std::vector<const FeatureCacheEntry*>& batch,
                       double prior_weight, BatchGraph* graph);

struct TrainSummary {
  int steps = 0;
  std::vector<double> loss_trace;
  std::map<std::string, double> initial_terms;
  std::map<std::string, double> final_terms;
  double initial_total = 0.0;
  double final_total = 0.0;
  // Frobenius norm of the mean entrywise |R^{AS}| over the final epoch.
  double final_epoch_mean_r_fro = 0.0;
};

using TrainLogger = std::function<void(int step, const std::string& line)>;

TrainSummary train_model(ModelState* state, const std::vector<FeatureCacheEntry>& data, int steps,
                         const std::string& checkpoint_dir = "", TrainLogger logger = nullptr);

void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace mmtts

#endif  // MMTTS_SRC_MODEL_H_
