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

#include "model.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "align.h"
#include "binio.h"
#include "rng.h"
#include "util.h"

namespace mmtts {

namespace {

using nlohmann::json;

constexpr double kLog2Pi = 1.8378770664093453;

struct FlowSplit {
  int cond_start, cond_rows, trans_start, trans_rows;
};

// Even steps condition on the lower half and transform the upper; odd steps
// swap, so every channel is transformed at least every other step.
FlowSplit flow_split(int n_mels, int k) {
  const int ha = n_mels / 2;
  const int hb = n_mels - ha;
  if (k % 2 == 0) return {0, ha, ha, hb};
  return {ha, hb, 0, ha};
}

std::string flow_step_name(int k) {
  std::ostringstream os;
  os << "flow/s" << (k < 10 ? "0" : "") << k;
  return os.str();
}

Eigen::MatrixXd mel_to_matrix(const MelSpectrogram& mel) {
  Eigen::MatrixXd m(mel.n_mels, mel.frames);
  for (int c = 0; c < mel.n_mels; ++c) {
    for (int f = 0; f < mel.frames; ++f) m(c, f) = mel.at(c, f);
  }
  return m;
}

Eigen::MatrixXd row_from(const std::vector<double>& v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

const SpeakerPitchStats& stats_for_speaker(const ModelState& state, int speaker_id) {
  for (const SpeakerPitchStats& s : state.stats.speakers) {
    if (s.speaker_id == speaker_id) return s;
  }
  fail(StatusCode::kNotFound, "no F0 statistics for speaker id ", speaker_id,
       "; was the corpus prepared with this speaker?");
}

// F0 context/targets: standardized per speaker when configured, otherwise
// raw Hz scaled to O(1). Unvoiced frames are 0 either way.
std::vector<double> f0_context(const ModelState& state, const FeatureCacheEntry& entry) {
  std::vector<double> out(entry.pitch.f0_hz.size(), 0.0);
  if (state.config.training.standardize_f0) {
    const SpeakerPitchStats& st = stats_for_speaker(state, entry.speaker_id);
    const std::vector<float> norm = standardize_f0(entry.pitch, st, state.config.features);
    for (size_t i = 0; i < norm.size(); ++i) out[i] = norm[i];
  } else {
    for (size_t i = 0; i < out.size(); ++i) {
      out[i] = entry.pitch.voiced[i] ? 0.01 * entry.pitch.f0_hz[i] : 0.0;
    }
  }
  return out;
}

std::vector<double> voicing_of(const FeatureCacheEntry& entry) {
  std::vector<double> out(entry.pitch.voiced.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = entry.pitch.voiced[i] ? 1.0 : 0.0;
  return out;
}

std::vector<double> energy_context(const ModelState& state, const FeatureCacheEntry& entry) {
  std::vector<double> out(entry.energy.values.size());
  const double mean = state.stats.energy_mean;
  const double sd = state.stats.energy_std > 0 ? state.stats.energy_std : 1.0;
  for (size_t i = 0; i < out.size(); ++i) out[i] = (entry.energy.values[i] - mean) / sd;
  return out;
}

void check_speaker_accent(const ModelState& state, int speaker_id, int accent_id) {
  if (speaker_id < 0 || speaker_id >= state.n_speakers()) {
    fail(StatusCode::kInvalidArgument, "speaker id ", speaker_id, " outside [0, ",
         state.n_speakers(), ")");
  }
  if (accent_id < 0 || accent_id >= state.n_accents()) {
    fail(StatusCode::kInvalidArgument, "accent id ", accent_id, " outside [0, ", state.n_accents(),
         ")");
  }
}

}  // namespace

int ModelState::ctx_dim() const {
  const ModelDims& d = config.model;
  return d.c_txt + d.d_accent + d.d_speaker + (config.mode == "rm" ? 3 : 0);
}

ModelState init_model(const ToolkitConfig& config, const PhonemeInventory& inventory,
                      std::vector<std::string> speaker_names,
                      std::vector<std::string> accent_names,
                      std::vector<std::string> language_names, CorpusStats stats) {
  config.validate();
  if (speaker_names.empty() || accent_names.empty()) {
    fail(StatusCode::kInvalidArgument, "model needs at least one speaker and one accent");
  }
  ModelState state;
  state.config = config;
  state.inventory = inventory;
  state.speaker_names = std::move(speaker_names);
  state.accent_names = std::move(accent_names);
  state.language_names = std::move(language_names);
  state.stats = std::move(stats);

  const ModelDims& d = config.model;
  const int n_mels = config.features.n_mels;
  const int v = inventory.size();
  const int ns = state.n_speakers();
  const int na = state.n_accents();
  const int ctx = state.ctx_dim();

  Rng rng(config.training.seed);
  auto dense = [&](int rows, int cols, double scale) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, scale);
    }
    return m;
  };
  auto glorot = [&](int rows, int cols) { return dense(rows, cols, 1.0 / std::sqrt(cols)); };
  auto zeros = [](int rows, int cols) { return Eigen::MatrixXd::Zero(rows, cols); };

  ParamStore& p = state.params;
  p.create("emb/token", dense(d.c_txt, v, 0.5));
  p.create("emb/accent", dense(d.d_accent, na, 0.5));
  p.create("emb/speaker", dense(d.d_speaker, ns, 0.5));

  p.create("enc/w1", glorot(d.encoder_hidden, d.c_txt + d.d_accent));
  p.create("enc/b1", zeros(d.encoder_hidden, 1));
  p.create("enc/w2", glorot(d.c_txt, d.encoder_hidden));
  p.create("enc/b2", zeros(d.c_txt, 1));

  p.create("attn/key_w", glorot(d.attn_dim, d.c_txt + d.d_accent));
  p.create("attn/key_b", zeros(d.attn_dim, 1));
  p.create("attn/query_w", glorot(d.attn_dim, n_mels));
  p.create("attn/query_b", zeros(d.attn_dim, 1));

  p.create("adv/w", dense(ns, d.c_txt, 0.01));
  p.create("adv/b", zeros(ns, 1));

  const int attr_in = d.c_txt + d.d_accent + d.d_speaker;
  for (const char* head : {"dur", "f0", "energy"}) {
    p.create(std::string(head) + "/w1", glorot(d.predictor_hidden, attr_in));
    p.create(std::string(head) + "/b1", zeros(d.predictor_hidden, 1));
    p.create(std::string(head) + "/w2", zeros(1, d.predictor_hidden));
    p.create(std::string(head) + "/b2", zeros(1, 1));
  }

  p.create("flow/pre_logscale", zeros(n_mels, 1));
  p.create("flow/pre_shift", zeros(n_mels, 1));
  for (int k = 0; k < d.flow_steps; ++k) {
    const FlowSplit split = flow_split(n_mels, k);
    const std::string base = flow_step_name(k);
    p.create(base + "/w1", glorot(d.flow_hidden, split.cond_rows + ctx));
    p.create(base + "/b1", zeros(d.flow_hidden, 1));
    // Zero-init the output layer so every coupling starts as the identity.
    p.create(base + "/w2", zeros(2 * split.trans_rows, d.flow_hidden));
    p.create(base + "/b2", zeros(2 * split.trans_rows, 1));
  }
  return state;
}

Eigen::MatrixXd encode_text(const ModelState& state, const std::vector<int>& token_ids,
                            int accent_id) {
  if (token_ids.empty()) fail(StatusCode::kInvalidArgument, "empty token sequence");
  check_speaker_accent(state, 0, accent_id);
  const ParamStore& p = state.params;
  const Eigen::MatrixXd& tokens = p.get("emb/token");
  for (int id : token_ids) {
    if (id < 0 || id >= tokens.cols()) {
      fail(StatusCode::kInvalidArgument, "token id ", id, " outside the inventory");
    }
  }
  const int t_count = static_cast<int>(token_ids.size());
  Eigen::MatrixXd enc_in(tokens.rows() + p.get("emb/accent").rows(), t_count);
  for (int t = 0; t < t_count; ++t) {
    enc_in.col(t) << tokens.col(token_ids[t]), p.get("emb/accent").col(accent_id);
  }
  const Eigen::MatrixXd h =
      ((p.get("enc/w1") * enc_in).colwise() + Eigen::VectorXd(p.get("enc/b1").col(0)))
          .array()
          .tanh();
  return (p.get("enc/w2") * h).colwise() + Eigen::VectorXd(p.get("enc/b2").col(0));
}

Eigen::MatrixXd expand_by_durations(const Eigen::MatrixXd& phi,
                                    const std::vector<int>& durations) {
  if (static_cast<Eigen::Index>(durations.size()) != phi.cols()) {
    fail(StatusCode::kInvalidArgument, "got ", durations.size(), " durations for ", phi.cols(),
         " tokens");
  }
  int frames = 0;
  for (int d : durations) {
    if (d < 0) fail(StatusCode::kInvalidArgument, "negative duration");
    frames += d;
  }
  Eigen::MatrixXd out(phi.rows(), frames);
  int f = 0;
  for (size_t t = 0; t < durations.size(); ++t) {
    for (int i = 0; i < durations[t]; ++i) out.col(f++) = phi.col(static_cast<Eigen::Index>(t));
  }
  return out;
}

namespace {

// Shared two-layer head: w2 * tanh(w1 * x + b1) + b2, 1 x N output.
Eigen::RowVectorXd mlp_head(const ParamStore& p, const std::string& base,
                            const Eigen::MatrixXd& input) {
  const Eigen::MatrixXd h =
      ((p.get(base + "/w1") * input).colwise() + Eigen::VectorXd(p.get(base + "/b1").col(0)))
          .array()
          .tanh();
  return ((p.get(base + "/w2") * h).colwise() + Eigen::VectorXd(p.get(base + "/b2").col(0)))
      .row(0);
}

Eigen::MatrixXd tile_col(const Eigen::MatrixXd& table, int col, int n) {
  return table.col(col).replicate(1, n);
}

}  // namespace

AttributePrediction predict_attributes(const ModelState& state, const Eigen::MatrixXd& phi,
                                       int accent_id, int speaker_id) {
  check_speaker_accent(state, speaker_id, accent_id);
  const ParamStore& p = state.params;
  const int t_count = static_cast<int>(phi.cols());

  Eigen::MatrixXd attr_in(phi.rows() + state.config.model.d_accent + state.config.model.d_speaker,
                          t_count);
  attr_in << phi, tile_col(p.get("emb/accent"), accent_id, t_count),
      tile_col(p.get("emb/speaker"), speaker_id, t_count);

  AttributePrediction out;
  const Eigen::RowVectorXd log_dur = mlp_head(p, "dur", attr_in);
  out.log_durations.assign(log_dur.data(), log_dur.data() + t_count);
  int frames = 0;
  for (int t = 0; t < t_count; ++t) {
    const int d = std::max(1, static_cast<int>(std::lround(std::exp(log_dur(t)) - 1.0)));
    out.durations.push_back(d);
    frames += d;
  }

  const Eigen::MatrixXd phi_frames = expand_by_durations(phi, out.durations);
  Eigen::MatrixXd frame_in(attr_in.rows(), frames);
  frame_in << phi_frames, tile_col(p.get("emb/accent"), accent_id, frames),
      tile_col(p.get("emb/speaker"), speaker_id, frames);
  const Eigen::RowVectorXd f0 = mlp_head(p, "f0", frame_in);
  const Eigen::RowVectorXd energy = mlp_head(p, "energy", frame_in);
  out.f0_norm.assign(f0.data(), f0.data() + frames);
  out.energy_norm.assign(energy.data(), energy.data() + frames);
  return out;
}

ConditioningContext build_context(const ModelState& state, const Eigen::MatrixXd& phi_frames,
                                  int accent_id, int speaker_id,
                                  const std::vector<double>* f0_norm,
                                  const std::vector<double>* voicing,
                                  const std::vector<double>* energy_norm) {
  check_speaker_accent(state, speaker_id, accent_id);
  const int frames = static_cast<int>(phi_frames.cols());
  const bool rm = state.config.mode == "rm";
  if (rm && (!f0_norm || !voicing || !energy_norm)) {
    fail(StatusCode::kInvalidArgument, "rm mode requires f0, voicing and energy context");
  }

  ConditioningContext ctx;
  ctx.values.resize(state.ctx_dim(), frames);
  int row = 0;
  auto put = [&](const std::string& name, const Eigen::MatrixXd& block) {
    if (block.cols() != frames) {
      fail(StatusCode::kInvalidArgument, "context block '", name, "' has ", block.cols(),
           " frames, expected ", frames);
    }
    ctx.values.middleRows(row, block.rows()) = block;
    ctx.blocks.emplace_back(name, static_cast<int>(block.rows()));
    row += static_cast<int>(block.rows());
  };
  put("phi", phi_frames);
  put("accent", tile_col(state.params.get("emb/accent"), accent_id, frames));
  put("speaker", tile_col(state.params.get("emb/speaker"), speaker_id, frames));
  if (rm) {
    put("f0", row_from(*f0_norm));
    put("voicing", row_from(*voicing));
    put("energy", row_from(*energy_norm));
  }
  return ctx;
}

FlowEval flow_forward_nll(const ModelState& state, const Eigen::MatrixXd& mel,
                          const ConditioningContext& ctx) {
  const ParamStore& p = state.params;
  const int n_mels = static_cast<int>(mel.rows());
  const Eigen::Index frames = mel.cols();
  if (ctx.values.cols() != frames) {
    fail(StatusCode::kInvalidArgument, "context has ", ctx.values.cols(), " frames, mel has ",
         frames);
  }

  FlowEval eval;
  const Eigen::ArrayXd pre_ls = p.get("flow/pre_logscale").col(0).array();
  Eigen::MatrixXd z =
      ((mel.array().colwise() * pre_ls.exp()).colwise() +
       p.get("flow/pre_shift").col(0).array())
          .matrix();
  eval.logdet = static_cast<double>(frames) * pre_ls.sum();

  for (int k = 0; k < state.config.model.flow_steps; ++k) {
    const FlowSplit split = flow_split(n_mels, k);
    const std::string base = flow_step_name(k);
    Eigen::MatrixXd net_in(split.cond_rows + ctx.values.rows(), frames);
    net_in << z.middleRows(split.cond_start, split.cond_rows), ctx.values;
    const Eigen::MatrixXd h =
        ((p.get(base + "/w1") * net_in).colwise() + Eigen::VectorXd(p.get(base + "/b1").col(0)))
            .array()
            .tanh();
    const Eigen::MatrixXd out =
        (p.get(base + "/w2") * h).colwise() + Eigen::VectorXd(p.get(base + "/b2").col(0));
    const Eigen::MatrixXd s = out.topRows(split.trans_rows).array().tanh();
    const Eigen::MatrixXd t = out.bottomRows(split.trans_rows);
    z.middleRows(split.trans_start, split.trans_rows) =
        (z.middleRows(split.trans_start, split.trans_rows).array() * s.array().exp() +
         t.array())
            .matrix();
    eval.logdet += s.sum();
    if (!z.allFinite()) {
      fail(StatusCode::kNumericError, "flow step ", k, " produced non-finite values");
    }
  }

  const double dim = static_cast<double>(n_mels) * static_cast<double>(frames);
  eval.z = std::move(z);
  eval.nll = (0.5 * eval.z.squaredNorm() + 0.5 * dim * kLog2Pi - eval.logdet) / dim;
  return eval;
}

Eigen::MatrixXd flow_inverse(const ModelState& state, const Eigen::MatrixXd& z,
                             const ConditioningContext& ctx) {
  const ParamStore& p = state.params;
  const int n_mels = static_cast<int>(z.rows());
  const Eigen::Index frames = z.cols();
  if (ctx.values.cols() != frames) {
    fail(StatusCode::kInvalidArgument, "context has ", ctx.values.cols(), " frames, z has ",
         frames);
  }

  Eigen::MatrixXd x = z;
  for (int k = state.config.model.flow_steps - 1; k >= 0; --k) {
    const FlowSplit split = flow_split(n_mels, k);
    const std::string base = flow_step_name(k);
    Eigen::MatrixXd net_in(split.cond_rows + ctx.values.rows(), frames);
    net_in << x.middleRows(split.cond_start, split.cond_rows), ctx.values;
    const Eigen::MatrixXd h =
        ((p.get(base + "/w1") * net_in).colwise() + Eigen::VectorXd(p.get(base + "/b1").col(0)))
            .array()
            .tanh();
    const Eigen::MatrixXd out =
        (p.get(base + "/w2") * h).colwise() + Eigen::VectorXd(p.get(base + "/b2").col(0));
    const Eigen::MatrixXd s = out.topRows(split.trans_rows).array().tanh();
    const Eigen::MatrixXd t = out.bottomRows(split.trans_rows);
    x.middleRows(split.trans_start, split.trans_rows) =
        ((x.middleRows(split.trans_start, split.trans_rows) - t).array() * (-s.array()).exp())
            .matrix();
  }
  const Eigen::ArrayXd pre_ls = p.get("flow/pre_logscale").col(0).array();
  const Eigen::ArrayXd pre_shift = p.get("flow/pre_shift").col(0).array();
  return ((x.array().colwise() - pre_shift).colwise() * (-pre_ls).exp()).matrix();
}

SynthesisResult synthesize(const ModelState& state, const SynthesisRequest& request) {
  const std::string mode = request.mode.empty() ? state.config.mode : request.mode;
  if (mode != "rt" && mode != "rm") {
    fail(StatusCode::kInvalidArgument, "mode must be 'rt' or 'rm', got '", mode, "'");
  }
  if (mode != state.config.mode) {
    fail(StatusCode::kInvalidArgument, "checkpoint was trained in '", state.config.mode,
         "' mode; cannot synthesize in '", mode, "' mode");
  }
  check_speaker_accent(state, request.speaker_id, request.accent_id);
  if (request.sigma < 0) fail(StatusCode::kInvalidArgument, "sigma must be nonnegative");
  const bool rm_ctx = mode == "rm";

  SynthesisResult result;
  const TokenSequence tokens = tokenize_ipa(request.ipa_text, state.inventory);
  result.token_ids = tokens.ids;
  const Eigen::MatrixXd phi = encode_text(state, tokens.ids, request.accent_id);
  const AttributePrediction attrs =
      predict_attributes(state, phi, request.accent_id, request.speaker_id);
  result.durations = attrs.durations;
  const int frames = static_cast<int>(attrs.f0_norm.size());

  const Eigen::MatrixXd phi_frames = expand_by_durations(phi, attrs.durations);
  std::vector<double> voicing(frames, 1.0);
  ConditioningContext ctx =
      rm_ctx ? build_context(state, phi_frames, request.accent_id, request.speaker_id,
                             &attrs.f0_norm, &voicing, &attrs.energy_norm)
             : build_context(state, phi_frames, request.accent_id, request.speaker_id, nullptr,
                             nullptr, nullptr);

  const int n_mels = state.config.features.n_mels;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n_mels, frames);
  if (request.sigma > 0) {
    Rng rng(request.seed);
    for (int c = 0; c < n_mels; ++c) {
      for (int f = 0; f < frames; ++f) z(c, f) = request.sigma * rng.normal();
    }
  }
  const Eigen::MatrixXd mel = flow_inverse(state, z, ctx);

  result.mel.n_mels = n_mels;
  result.mel.frames = frames;
  result.mel.hop = state.config.features.hop;
  result.mel.sample_rate = state.config.features.sample_rate;
  result.mel.values.resize(static_cast<size_t>(n_mels) * frames);
  for (int c = 0; c < n_mels; ++c) {
    for (int f = 0; f < frames; ++f) {
      result.mel.values[static_cast<size_t>(c) * frames + f] = static_cast<float>(mel(c, f));
    }
  }

  if (mode == "rm") {
    // De-standardize with the TARGET speaker's statistics: this is the step
    // that re-imposes the requested identity on the predicted prosody.
    if (state.config.training.standardize_f0) {
      const SpeakerPitchStats& st = stats_for_speaker(state, request.speaker_id);
      for (double f0n : attrs.f0_norm) result.f0_hz.push_back(st.mean_hz + st.std_hz * f0n);
    } else {
      for (double f0n : attrs.f0_norm) result.f0_hz.push_back(f0n / 0.01);
    }
    for (double en : attrs.energy_norm) {
      result.energy.push_back(state.stats.energy_mean + state.stats.energy_std * en);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training graph
// ---------------------------------------------------------------------------

namespace {

Var tape_mlp_head(Tape* tape, const std::map<std::string, Var>& pv, const std::string& base,
                  Var input) {
  Var h = tape->tanh(
      tape->add_colvec(tape->matmul(pv.at(base + "/w1"), input), pv.at(base + "/b1")));
  return tape->add_colvec(tape->matmul(pv.at(base + "/w2"), h), pv.at(base + "/b2"));
}

Var mean_of(Tape* tape, const std::vector<Var>& vars) {
  Var sum = vars.front();
  for (size_t i = 1; i < vars.size(); ++i) sum = tape->add(sum, vars[i]);
  return tape->scale(sum, 1.0 / static_cast<double>(vars.size()));
}

}  // namespace

void build_batch_graph(const ModelState& state, const std::vector<const FeatureCacheEntry*>& batch,
                       double prior_weight, BatchGraph* graph) {
  if (batch.empty()) fail(StatusCode::kInvalidArgument, "empty batch");
  Tape& tape = graph->tape;
  tape.clear();
  graph->param_vars.clear();
  graph->terms.clear();

  for (const auto& [name, value] : state.params.values()) {
    graph->param_vars[name] = tape.leaf(value, /*requires_grad=*/true);
  }
  const std::map<std::string, Var>& pv = graph->param_vars;
  auto P = [&](const std::string& name) { return pv.at(name); };

  const ModelDims& dims = state.config.model;
  const LossWeights& w = state.config.losses;
  const bool rm = state.config.mode == "rm";
  const int n_mels = state.config.features.n_mels;
  const int batch_size = static_cast<int>(batch.size());

  std::vector<Var> mel_nlls, align_nlls, dur_losses, f0_losses, energy_losses;
  std::vector<Var> pooled_phis, accent_cols, speaker_cols;
  std::vector<int> speaker_labels;

  for (const FeatureCacheEntry* entry : batch) {
    const int t_count = static_cast<int>(entry->token_ids.size());
    const int frames = entry->mel.frames;
    if (frames < t_count) {
      fail(StatusCode::kInvalidArgument, "utterance '", entry->key, "': ", frames,
           " frames but ", t_count, " tokens; audio too short to align");
    }
    const std::vector<int> accent_tile_t(t_count, entry->accent_id);
    const std::vector<int> speaker_tile_t(t_count, entry->speaker_id);

    // Encoder.
    Var tok = tape.gather_cols(P("emb/token"), entry->token_ids);
    Var acc_t = tape.gather_cols(P("emb/accent"), accent_tile_t);
    Var spk_t = tape.gather_cols(P("emb/speaker"), speaker_tile_t);
    Var enc_in = tape.vcat(tok, acc_t);
    Var h = tape.tanh(tape.add_colvec(tape.matmul(P("enc/w1"), enc_in), P("enc/b1")));
    Var phi = tape.add_colvec(tape.matmul(P("enc/w2"), h), P("enc/b2"));

    // Accent-conditioned alignment against the mel frames.
    Var mel_const = tape.constant(mel_to_matrix(entry->mel));
    Var keys =
        tape.add_colvec(tape.matmul(P("attn/key_w"), tape.vcat(phi, acc_t)), P("attn/key_b"));
    Var queries = tape.add_colvec(tape.matmul(P("attn/query_w"), mel_const), P("attn/query_b"));
    Var log_att = tape.col_log_softmax(tape.neg_sqdist(keys, queries));
    Var log_probs = log_att;
    if (prior_weight > 0.0) {
      const Eigen::MatrixXd prior =
          beta_binomial_log_prior(t_count, frames, state.config.training.align_prior_scale);
      log_probs = tape.add(log_att, tape.scale(tape.constant(prior), prior_weight));
    }
    align_nlls.push_back(tape.scale(tape.forward_sum(log_probs), 1.0 / frames));

    // Hard alignment for duration targets and expansion (no gradient).
    const std::vector<int> path = viterbi_path(tape.value(log_probs));
    const std::vector<int> durations = durations_from_path(path, t_count);

    Var phi_frames = tape.gather_cols(phi, path);
    const std::vector<int> accent_tile_f(frames, entry->accent_id);
    const std::vector<int> speaker_tile_f(frames, entry->speaker_id);
    Var acc_f = tape.gather_cols(P("emb/accent"), accent_tile_f);
    Var spk_f = tape.gather_cols(P("emb/speaker"), speaker_tile_f);

    Var ctx = tape.vcat(tape.vcat(phi_frames, acc_f), spk_f);
    std::vector<double> f0_ctx, voicing, energy_ctx;
    if (rm) {
      f0_ctx = f0_context(state, *entry);
      voicing = voicing_of(*entry);
      energy_ctx = energy_context(state, *entry);
      Var prosody = tape.vcat(tape.vcat(tape.constant(row_from(f0_ctx)),
                                        tape.constant(row_from(voicing))),
                              tape.constant(row_from(energy_ctx)));
      ctx = tape.vcat(ctx, prosody);
    }

    // Flow forward pass and exact NLL.
    Var pre_scale = tape.exp(P("flow/pre_logscale"));  // n_mels x 1
    Var z = tape.add_colvec(
        tape.cwise_mul(mel_const,
                       tape.matmul(pre_scale, tape.constant(Eigen::MatrixXd::Ones(1, frames)))),
        P("flow/pre_shift"));
    Var logdet = tape.scale(tape.sum_all(P("flow/pre_logscale")), static_cast<double>(frames));
    for (int k = 0; k < dims.flow_steps; ++k) {
      const FlowSplit split = flow_split(n_mels, k);
      const std::string base = flow_step_name(k);
      Var cond = tape.slice_rows(z, split.cond_start, split.cond_rows);
      Var trans = tape.slice_rows(z, split.trans_start, split.trans_rows);
      Var net_in = tape.vcat(cond, ctx);
      Var hk = tape.tanh(tape.add_colvec(tape.matmul(P(base + "/w1"), net_in), P(base + "/b1")));
      Var out = tape.add_colvec(tape.matmul(P(base + "/w2"), hk), P(base + "/b2"));
      Var s = tape.tanh(tape.slice_rows(out, 0, split.trans_rows));
      Var shift = tape.slice_rows(out, split.trans_rows, split.trans_rows);
      Var transformed = tape.add(tape.cwise_mul(trans, tape.exp(s)), shift);
      z = (k % 2 == 0) ? tape.vcat(cond, transformed) : tape.vcat(transformed, cond);
      logdet = tape.add(logdet, tape.sum_all(s));
    }
    const double dim = static_cast<double>(n_mels) * frames;
    Var nll = tape.scale(
        tape.sub(tape.add(tape.scale(tape.sum_squares(z), 0.5), tape.scalar(0.5 * dim * kLog2Pi)),
                 logdet),
        1.0 / dim);
    mel_nlls.push_back(nll);

    // Duration predictor (both modes; synthesis always needs durations).
    Var dur_in = tape.vcat(tape.vcat(phi, acc_t), spk_t);
    Var dur_pred = tape_mlp_head(&tape, pv, "dur", dur_in);
    std::vector<double> log_dur_target(t_count);
    for (int t = 0; t < t_count; ++t) log_dur_target[t] = std::log(1.0 + durations[t]);
    dur_losses.push_back(
        tape.mean_abs_error(dur_pred, tape.constant(row_from(log_dur_target))));

    if (rm) {
      Var frame_in = tape.vcat(tape.vcat(phi_frames, acc_f), spk_f);
      Var f0_pred = tape_mlp_head(&tape, pv, "f0", frame_in);
      f0_losses.push_back(tape.mean_squared_error(f0_pred, tape.constant(row_from(f0_ctx))));
      Var energy_pred = tape_mlp_head(&tape, pv, "energy", frame_in);
      energy_losses.push_back(
          tape.mean_squared_error(energy_pred, tape.constant(row_from(energy_ctx))));
    }

    if (w.w_adv > 0.0) {
      pooled_phis.push_back(tape.gradient_reversal(tape.mean_cols(phi), w.grl_lambda));
      speaker_labels.push_back(entry->speaker_id);
    }
    accent_cols.push_back(tape.gather_cols(P("emb/accent"), {entry->accent_id}));
    speaker_cols.push_back(tape.gather_cols(P("emb/speaker"), {entry->speaker_id}));
  }

  std::vector<std::pair<std::string, Var>> weighted;
  Var mel_term = mean_of(&tape, mel_nlls);
  Var align_term = mean_of(&tape, align_nlls);
  Var dur_term = mean_of(&tape, dur_losses);
  weighted.emplace_back("mel_nll", mel_term);
  weighted.emplace_back("align", align_term);
  weighted.emplace_back("duration", dur_term);

  Var total = tape.add(tape.add(mel_term, align_term), dur_term);
  if (rm) {
    Var f0_term = mean_of(&tape, f0_losses);
    Var energy_term = mean_of(&tape, energy_losses);
    weighted.emplace_back("f0", f0_term);
    weighted.emplace_back("energy", energy_term);
    total = tape.add(total, tape.add(f0_term, energy_term));
  }

  Var var_term = tape.add(tape.variance_hinge(P("emb/accent"), w.gamma, w.epsilon),
                          tape.variance_hinge(P("emb/speaker"), w.gamma, w.epsilon));
  Var covar_term = tape.add(tape.covariance_sq(P("emb/accent")),
                            tape.covariance_sq(P("emb/speaker")));
  weighted.emplace_back("var", var_term);
  weighted.emplace_back("covar", covar_term);
  if (w.w_var > 0.0) total = tape.add(total, tape.scale(var_term, w.w_var));
  if (w.w_covar > 0.0) total = tape.add(total, tape.scale(covar_term, w.w_covar));

  // Accent-speaker cross-correlation over the batch, means from the tables.
  if (batch_size >= 2) {
    Var batch_a = tape.hcat(accent_cols);
    Var batch_s = tape.hcat(speaker_cols);
    Var centered_a = tape.sub_colvec(batch_a, tape.mean_cols(P("emb/accent")));
    Var centered_s = tape.sub_colvec(batch_s, tape.mean_cols(P("emb/speaker")));
    Var r = tape.scale(tape.matmul(centered_a, tape.transpose(centered_s)),
                       1.0 / (batch_size - 1));
    Var xcorr_term =
        tape.scale(tape.sum_squares(r), 1.0 / (dims.d_accent * dims.d_speaker));
    weighted.emplace_back("xcorr", xcorr_term);
    if (w.w_xcorr > 0.0) total = tape.add(total, tape.scale(xcorr_term, w.w_xcorr));
    graph->r_abs = tape.value(r).cwiseAbs();
  } else {
    graph->r_abs = Eigen::MatrixXd::Zero(dims.d_accent, dims.d_speaker);
  }

  if (w.w_adv > 0.0) {
    Var pooled = tape.hcat(pooled_phis);
    Var logits = tape.add_colvec(tape.matmul(P("adv/w"), pooled), P("adv/b"));
    Var adv_term = tape.cross_entropy(logits, speaker_labels);
    weighted.emplace_back("adv", adv_term);
    total = tape.add(total, tape.scale(adv_term, w.w_adv));
  }

  for (const auto& [name, var] : weighted) {
    const double v = tape.value(var)(0, 0);
    if (!std::isfinite(v)) {
      fail(StatusCode::kNumericError, "loss term '", name, "' is non-finite (", v, ")");
    }
    graph->terms[name] = v;
  }
  graph->terms["total"] = tape.value(total)(0, 0);
  if (!std::isfinite(graph->terms["total"])) {
    fail(StatusCode::kNumericError, "total loss is non-finite");
  }
  graph->total = total;
}

TrainSummary train_model(ModelState* state, const std::vector<FeatureCacheEntry>& data, int steps,
                         const std::string& checkpoint_dir, TrainLogger logger) {
  if (data.empty()) fail(StatusCode::kInvalidArgument, "no training data");
  const TrainingConfig& tc = state->config.training;
  const int batch_size = std::min<int>(tc.batch_size, static_cast<int>(data.size()));
  if (batch_size < 2 && state->config.losses.w_xcorr > 0.0) {
    fail(StatusCode::kInvalidArgument,
         "cross-correlation loss needs batches of >= 2 utterances; got ", batch_size);
  }

  Rng rng(tc.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<int> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  auto reshuffle = [&] {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
  };
  reshuffle();
  size_t cursor = 0;

  const int steps_per_epoch =
      std::max(1, static_cast<int>(data.size()) / std::max(1, batch_size));
  std::deque<Eigen::MatrixXd> r_window;

  TrainSummary summary;
  summary.steps = steps;
  BatchGraph graph;
  for (int step = 0; step < steps; ++step) {
    if (cursor + static_cast<size_t>(batch_size) > order.size()) {
      reshuffle();
      cursor = 0;
    }
    std::vector<const FeatureCacheEntry*> batch;
    for (int i = 0; i < batch_size; ++i) batch.push_back(&data[order[cursor++]]);

    const double prior_fraction = tc.align_prior_fraction;
    const double prior_weight =
        (prior_fraction > 0.0 && step < prior_fraction * steps) ? 1.0 : 0.0;

    build_batch_graph(*state, batch, prior_weight, &graph);
    graph.tape.backward(graph.total);

    std::map<std::string, Eigen::MatrixXd> grads;
    for (const auto& [name, var] : graph.param_vars) {
      grads[name] = graph.tape.grad(var);
    }
    state->params.adam_step(grads, tc.lr);

    const double total = graph.terms.at("total");
    summary.loss_trace.push_back(total);
    if (step == 0) {
      summary.initial_terms = graph.terms;
      summary.initial_total = total;
    }
    r_window.push_back(graph.r_abs);
    while (static_cast<int>(r_window.size()) > steps_per_epoch) r_window.pop_front();

    if (logger && (step % 10 == 0 || step + 1 == steps)) {
      std::ostringstream line;
      line << "step " << step << " total " << total;
      for (const auto& [name, value] : graph.terms) {
        if (name != "total") line << " " << name << " " << value;
      }
      logger(step, line.str());
    }
    if (!checkpoint_dir.empty() && tc.checkpoint_interval > 0 &&
        (step + 1) % tc.checkpoint_interval == 0 && step + 1 < steps) {
      save_checkpoint(*state, checkpoint_dir + "/checkpoint_step" + std::to_string(step + 1) +
                                  ".mmtb");
    }
  }
  summary.final_terms = graph.terms;
  summary.final_total = summary.loss_trace.back();

  if (!r_window.empty()) {
    Eigen::MatrixXd mean_r = Eigen::MatrixXd::Zero(r_window[0].rows(), r_window[0].cols());
    for (const Eigen::MatrixXd& r : r_window) mean_r += r;
    mean_r /= static_cast<double>(r_window.size());
    summary.final_epoch_mean_r_fro = mean_r.norm();
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const ModelState& state, const std::string& path) {
  TensorBundle bundle;
  const std::string config_text = state.config.emit();
  const std::string inventory_text = state.inventory.serialize();

  json meta;
  meta["format"] = "mmtts-checkpoint";
  meta["version"] = 1;
  meta["config_hash"] = hex64(fnv1a64(config_text));
  meta["inventory_hash"] = hex64(fnv1a64(inventory_text));
  meta["speaker_names"] = state.speaker_names;
  meta["accent_names"] = state.accent_names;
  meta["language_names"] = state.language_names;
  meta["energy_mean"] = state.stats.energy_mean;
  meta["energy_std"] = state.stats.energy_std;

  bundle.put_bytes("meta", meta.dump(2));
  bundle.put_bytes("config", config_text);
  bundle.put_bytes("inventory", inventory_text);

  std::vector<double> f0_flat;
  for (const SpeakerPitchStats& s : state.stats.speakers) {
    f0_flat.push_back(static_cast<double>(s.speaker_id));
    f0_flat.push_back(s.mean_hz);
    f0_flat.push_back(s.std_hz);
    f0_flat.push_back(static_cast<double>(s.n_voiced_frames));
  }
  bundle.put_f64("f0_stats", {static_cast<uint32_t>(state.stats.speakers.size()), 4}, f0_flat);

  for (const auto& [name, value] : state.params.values()) {
    std::vector<double> flat(value.size());
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        flat[static_cast<size_t>(r) * value.cols() + c] = value(r, c);
      }
    }
    bundle.put_f64("param/" + name,
                   {static_cast<uint32_t>(value.rows()), static_cast<uint32_t>(value.cols())},
                   flat);
  }
  bundle.save(path);
}

ModelState load_checkpoint(const std::string& path) {
  const TensorBundle bundle = TensorBundle::load(path);
  json meta;
  try {
    meta = json::parse(bundle.get_bytes("meta"));
  } catch (const json::exception& e) {
    fail(StatusCode::kParseError, path, ": bad checkpoint meta: ", e.what());
  }
  if (meta.value("format", "") != "mmtts-checkpoint") {
    fail(StatusCode::kParseError, path, ": not a checkpoint file");
  }

  const std::string config_text = bundle.get_bytes("config");
  const std::string inventory_text = bundle.get_bytes("inventory");
  if (meta.value("config_hash", "") != hex64(fnv1a64(config_text))) {
    fail(StatusCode::kInvalidArgument, path, ": config hash mismatch; checkpoint is corrupt");
  }
  if (meta.value("inventory_hash", "") != hex64(fnv1a64(inventory_text))) {
    fail(StatusCode::kInvalidArgument, path, ": inventory hash mismatch; checkpoint is corrupt");
  }

  ModelState state;
  state.config = ToolkitConfig::parse(config_text);
  state.inventory = PhonemeInventory::deserialize(inventory_text);
  state.speaker_names = meta.at("speaker_names").get<std::vector<std::string>>();
  state.accent_names = meta.at("accent_names").get<std::vector<std::string>>();
  state.language_names = meta.at("language_names").get<std::vector<std::string>>();
  state.stats.energy_mean = meta.value("energy_mean", 0.0);
  state.stats.energy_std = meta.value("energy_std", 1.0);

  const std::vector<double> f0_flat = bundle.get_f64("f0_stats");
  for (size_t i = 0; i + 4 <= f0_flat.size(); i += 4) {
    SpeakerPitchStats s;
    s.speaker_id = static_cast<int>(f0_flat[i]);
    s.mean_hz = f0_flat[i + 1];
    s.std_hz = f0_flat[i + 2];
    s.n_voiced_frames = static_cast<int64_t>(f0_flat[i + 3]);
    state.stats.speakers.push_back(s);
  }

  for (const std::string& name : bundle.names()) {
    if (!starts_with(name, "param/")) continue;
    const std::vector<uint32_t>& dims = bundle.dims(name);
    if (dims.size() != 2) fail(StatusCode::kParseError, path, ": parameter ", name, " not 2-D");
    const std::vector<double> flat = bundle.get_f64(name);
    Eigen::MatrixXd m(dims[0], dims[1]);
    for (uint32_t r = 0; r < dims[0]; ++r) {
      for (uint32_t c = 0; c < dims[1]; ++c) {
        m(r, c) = flat[static_cast<size_t>(r) * dims[1] + c];
      }
    }
    state.params.create(name.substr(6), std::move(m));
  }
  return state;
}

}  // namespace mmtts
