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

#ifndef MMTTS_SRC_CONFIG_H_
#define MMTTS_SRC_CONFIG_H_

#include <cstdint>
#include <string>

#include "acoustic_features.h"
#include "util.h"

namespace mmtts {

// Disentanglement objective weights and constants.
struct LossWeights {
  double w_var = 10.0;
  double w_covar = 10.0;
  double w_xcorr = 10.0;
  double w_adv = 0.0;
  double gamma = 1.0;
  double epsilon = 1e-4;
  double grl_lambda = 1.0;
};

struct ModelDims {
  int c_txt = 32;
  int d_accent = 4;
  int d_speaker = 4;
  int flow_steps = 6;
  int flow_hidden = 48;
  int encoder_hidden = 48;
  int predictor_hidden = 32;
  int attn_dim = 16;
};

struct TrainingConfig {
  uint64_t seed = 1234;
  double lr = 2e-3;
  int batch_size = 8;
  int steps = 200;
  int checkpoint_interval = 0;  // 0: only the final checkpoint
  double align_prior_scale = 1.0;
  double align_prior_fraction = 0.5;
  double sigma = 0.0;  // sampling temperature used at synthesis time
  bool standardize_f0 = true;  // feed/predict per-speaker standardized F0
};

// The single key-value configuration file behind every CLI command.
// Unknown keys are rejected on load so config drift surfaces immediately.
struct ToolkitConfig {
  FeatureConfig features;
  LossWeights losses;
  ModelDims model;
  TrainingConfig training;
  std::string mode = "rm";  // "rt" or "rm"

  // Throws on any constraint violation (mode name, positivity, the batch
  // size >= 2 requirement when w_xcorr > 0, ...).
  void validate() const;

  // Key = value text with one key per line; parse(emit()) is value-identical.
  std::string emit() const;
  static ToolkitConfig parse(const std::string& text);
  static ToolkitConfig load(const std::string& path);

  void set_key(const std::string& key, const std::string& value);
  uint64_t hash() const { return fnv1a64(emit()); }
};

}  // namespace mmtts

#endif  // MMTTS_SRC_CONFIG_H_
