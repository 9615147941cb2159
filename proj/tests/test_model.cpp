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

#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acoustic_features.h"
#include "align.h"
#include "binio.h"
#include "config.h"
#include "losses.h"
#include "model.h"
#include "rng.h"
#include "test_support.h"
#include "text_frontend.h"
#include "util.h"

using namespace mmtts;
using testing::TempDir;

namespace {

ToolkitConfig small_config(const std::string& mode) {
  ToolkitConfig c;
  c.mode = mode;
  c.features.n_mels = 6;
  c.model.c_txt = 8;
  c.model.d_accent = 3;
  c.model.d_speaker = 3;
  c.model.flow_steps = 2;
  c.model.flow_hidden = 8;
  c.model.encoder_hidden = 8;
  c.model.predictor_hidden = 8;
  c.model.attn_dim = 4;
  c.training.batch_size = 2;
  return c;
}

ModelState make_state(const std::string& mode) {
  PhonemeInventory inv;
  inv.add_symbol("a");
  inv.add_symbol("b");
  CorpusStats stats;
  stats.energy_mean = -3.0;
  stats.energy_std = 2.0;
  stats.speakers.push_back({0, 150.0, 20.0, 100});
  stats.speakers.push_back({1, 210.0, 30.0, 100});
  return init_model(small_config(mode), inv, {"spk0", "spk1"}, {"alpha", "beta"}, {"lang0"},
                    stats);
}

// Several heads start at zero (identity flow, constant predictors); move every
// parameter to a generic point before testing nontrivial behavior.
void perturb_params(ModelState* state, uint64_t seed, double scale = 0.2) {
  Rng rng(seed);
  for (const std::string& name : state->params.names()) {
    Eigen::MatrixXd& m = state->params.get(name);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += rng.normal(0.0, scale);
    }
  }
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  }
  return m;
}

FeatureCacheEntry make_entry(const ModelState& state, Rng& rng, const std::string& key,
                             std::vector<int> token_ids, int frames, int speaker_id,
                             int accent_id) {
  FeatureCacheEntry e;
  e.key = key;
  e.token_ids = std::move(token_ids);
  e.speaker_id = speaker_id;
  e.accent_id = accent_id;
  e.language_id = 0;
  const FeatureConfig& fc = state.config.features;
  e.mel.n_mels = fc.n_mels;
  e.mel.frames = frames;
  e.mel.hop = fc.hop;
  e.mel.sample_rate = fc.sample_rate;
  e.mel.values.resize(static_cast<size_t>(fc.n_mels) * frames);
  for (float& v : e.mel.values) v = static_cast<float>(rng.normal(-4.0, 1.5));
  const SpeakerPitchStats& st = state.stats.speakers[speaker_id];
  e.pitch.f0_hz.resize(frames);
  e.pitch.voiced.resize(frames);
  for (int f = 0; f < frames; ++f) {
    const bool voiced = f == 0 || rng.uniform() > 0.25;
    e.pitch.voiced[f] = voiced ? 1 : 0;
    e.pitch.f0_hz[f] =
        voiced ? static_cast<float>(st.mean_hz + rng.normal(0.0, st.std_hz)) : 0.0f;
  }
  e.energy.values.resize(frames);
  for (float& v : e.energy.values) v = static_cast<float>(rng.normal(-3.0, 2.0));
  return e;
}

Eigen::MatrixXd mel_matrix(const MelSpectrogram& mel) {
  Eigen::MatrixXd m(mel.n_mels, mel.frames);
  for (int c = 0; c < mel.n_mels; ++c) {
    for (int f = 0; f < mel.frames; ++f) m(c, f) = mel.at(c, f);
  }
  return m;
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& w, const Eigen::MatrixXd& b,
                       const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = w * x;
  y.colwise() += Eigen::VectorXd(b.col(0));
  return y;
}

// Independent recomputation of a two-layer predictor head.
Eigen::MatrixXd plain_head(const ModelState& state, const std::string& base,
                           const Eigen::MatrixXd& x) {
  const ParamStore& p = state.params;
  const Eigen::MatrixXd h =
      affine(p.get(base + "/w1"), p.get(base + "/b1"), x).array().tanh().matrix();
  return affine(p.get(base + "/w2"), p.get(base + "/b2"), h);
}

Eigen::MatrixXd tile_col(const Eigen::MatrixXd& table, int id, int n) {
  return table.col(id).replicate(1, n);
}

std::vector<double> plain_f0_context(const ModelState& state, const FeatureCacheEntry& e) {
  const SpeakerPitchStats* st = nullptr;
  for (const SpeakerPitchStats& s : state.stats.speakers) {
    if (s.speaker_id == e.speaker_id) st = &s;
  }
  REQUIRE(st != nullptr);
  const std::vector<float> norm = standardize_f0(e.pitch, *st, state.config.features);
  return std::vector<double>(norm.begin(), norm.end());
}

std::vector<double> plain_voicing(const FeatureCacheEntry& e) {
  std::vector<double> out(e.pitch.voiced.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = e.pitch.voiced[i] ? 1.0 : 0.0;
  return out;
}

std::vector<double> plain_energy_context(const ModelState& state, const FeatureCacheEntry& e) {
  std::vector<double> out(e.energy.values.size());
  const double sd = state.stats.energy_std > 0 ? state.stats.energy_std : 1.0;
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = (e.energy.values[i] - state.stats.energy_mean) / sd;
  }
  return out;
}

Eigen::MatrixXd row_of(const std::vector<double>& v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

}  // namespace

TEST_CASE("model: init_model builds the documented parameter set") {
  ModelState rt = make_state("rt");
  ModelState rm = make_state("rm");
  CHECK(rt.ctx_dim() == 8 + 3 + 3);
  CHECK(rm.ctx_dim() == 8 + 3 + 3 + 3);
  CHECK(rt.n_speakers() == 2);
  CHECK(rt.n_accents() == 2);

  const ParamStore& p = rt.params;
  const int v = rt.inventory.size();
  CHECK(p.get("emb/token").rows() == 8);
  CHECK(p.get("emb/token").cols() == v);
  CHECK(p.get("emb/accent").rows() == 3);
  CHECK(p.get("emb/accent").cols() == 2);
  CHECK(p.get("emb/speaker").rows() == 3);
  CHECK(p.get("emb/speaker").cols() == 2);
  CHECK(p.get("enc/w1").rows() == 8);
  CHECK(p.get("enc/w1").cols() == 8 + 3);
  CHECK(p.get("enc/w2").rows() == 8);
  CHECK(p.get("enc/w2").cols() == 8);
  CHECK(p.get("attn/key_w").rows() == 4);
  CHECK(p.get("attn/key_w").cols() == 8 + 3);
  CHECK(p.get("attn/query_w").rows() == 4);
  CHECK(p.get("attn/query_w").cols() == 6);
  CHECK(p.get("adv/w").rows() == 2);
  CHECK(p.get("adv/w").cols() == 8);
  for (const char* head : {"dur", "f0", "energy"}) {
    const std::string base(head);
    CHECK(p.get(base + "/w1").rows() == 8);
    CHECK(p.get(base + "/w1").cols() == 8 + 3 + 3);
    // Heads start at zero so the first prediction is exactly neutral.
    CHECK(p.get(base + "/w2").cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.get(base + "/b2").cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(p.get("flow/pre_logscale").cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.get("flow/pre_shift").cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.has("flow/s00/w1"));
  CHECK(p.has("flow/s01/w1"));
  CHECK_FALSE(p.has("flow/s02/w1"));
  // Coupling nets see [conditioning half of the mel; context] and emit
  // scale+shift rows for the transformed half.
  CHECK(p.get("flow/s00/w1").cols() == 3 + rt.ctx_dim());
  CHECK(rm.params.get("flow/s00/w1").cols() == 3 + rm.ctx_dim());
  CHECK(p.get("flow/s00/w2").rows() == 2 * 3);
  CHECK(p.get("flow/s00/w2").cwiseAbs().maxCoeff() == 0.0);

  // Same config and seed give bit-identical initialization.
  ModelState rm2 = make_state("rm");
  CHECK(max_abs_diff(rm.params.get("emb/token"), rm2.params.get("emb/token")) == 0.0);

  CHECK_THROWS_WITH_AS(
      (void)init_model(small_config("rt"), rt.inventory, {}, {"alpha"}, {}, CorpusStats{}),
      doctest::Contains("at least one speaker"), Error);
}

TEST_CASE("model: encode_text matches its formula and conditions on accent") {
  ModelState st = make_state("rt");
  const int a = st.inventory.id_of("a");
  const int b = st.inventory.id_of("b");
  REQUIRE(a > 0);
  REQUIRE(b > 0);
  const std::vector<int> ids = {a, b, a};

  const Eigen::MatrixXd phi = encode_text(st, ids, 0);
  CHECK(phi.rows() == 8);
  CHECK(phi.cols() == 3);
  CHECK(max_abs_diff(encode_text(st, ids, 0), phi) == 0.0);

  // Independent recomputation: two-layer tanh MLP over [token emb; accent emb].
  const ParamStore& p = st.params;
  Eigen::MatrixXd enc_in(8 + 3, 3);
  enc_in.topRows(8) << p.get("emb/token").col(a), p.get("emb/token").col(b),
      p.get("emb/token").col(a);
  enc_in.bottomRows(3) = tile_col(p.get("emb/accent"), 0, 3);
  const Eigen::MatrixXd h =
      affine(p.get("enc/w1"), p.get("enc/b1"), enc_in).array().tanh().matrix();
  const Eigen::MatrixXd expected = affine(p.get("enc/w2"), p.get("enc/b2"), h);
  CHECK(max_abs_diff(phi, expected) < 1e-14);

  // A different accent embedding changes the encoding.
  const Eigen::MatrixXd phi_other = encode_text(st, ids, 1);
  CHECK(max_abs_diff(phi, phi_other) > 1e-8);

  CHECK_THROWS_WITH_AS((void)encode_text(st, {}, 0), doctest::Contains("empty token sequence"),
                       Error);
  CHECK_THROWS_WITH_AS((void)encode_text(st, {st.inventory.size()}, 0),
                       doctest::Contains("outside the inventory"), Error);
}

TEST_CASE("model: expand_by_durations repeats encoder columns in order") {
  Eigen::MatrixXd phi(2, 2);
  phi << 1.0, 2.0, 3.0, 4.0;
  const Eigen::MatrixXd out = expand_by_durations(phi, {2, 1});
  REQUIRE(out.rows() == 2);
  REQUIRE(out.cols() == 3);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(1, 0) == 3.0);
  CHECK(out(0, 1) == 1.0);
  CHECK(out(1, 1) == 3.0);
  CHECK(out(0, 2) == 2.0);
  CHECK(out(1, 2) == 4.0);

  CHECK_THROWS_WITH_AS((void)expand_by_durations(phi, {1}),
                       doctest::Contains("got 1 durations for 2 tokens"), Error);
  CHECK_THROWS_WITH_AS((void)expand_by_durations(phi, {2, -1}),
                       doctest::Contains("negative duration"), Error);
}

TEST_CASE("model: predict_attributes is neutral at init and consistent after") {
  ModelState st = make_state("rm");
  Rng rng(41);
  const Eigen::MatrixXd phi = random_matrix(rng, 8, 3);

  // Zero-initialized heads predict log-duration 0 => duration max(1, e^0-1)=1.
  const AttributePrediction neutral = predict_attributes(st, phi, 0, 1);
  REQUIRE(neutral.durations.size() == 3);
  REQUIRE(neutral.log_durations.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(neutral.log_durations[t] == 0.0);
    CHECK(neutral.durations[t] == 1);
  }
  REQUIRE(neutral.f0_norm.size() == 3);
  REQUIRE(neutral.energy_norm.size() == 3);
  for (double x : neutral.f0_norm) CHECK(x == 0.0);
  for (double x : neutral.energy_norm) CHECK(x == 0.0);

  perturb_params(&st, 77);
  const AttributePrediction attrs = predict_attributes(st, phi, 1, 0);
  int total = 0;
  for (size_t t = 0; t < attrs.durations.size(); ++t) {
    CHECK(attrs.durations[t] >= 1);
    const int expected = std::max<int>(
        1, static_cast<int>(std::lround(std::exp(attrs.log_durations[t]) - 1.0)));
    CHECK(attrs.durations[t] == expected);
    total += attrs.durations[t];
  }
  CHECK(static_cast<int>(attrs.f0_norm.size()) == total);
  CHECK(static_cast<int>(attrs.energy_norm.size()) == total);

  // The raw log-durations are the dur head applied to [phi; accent; speaker].
  Eigen::MatrixXd attr_in(8 + 3 + 3, 3);
  attr_in.topRows(8) = phi;
  attr_in.middleRows(8, 3) = tile_col(st.params.get("emb/accent"), 1, 3);
  attr_in.bottomRows(3) = tile_col(st.params.get("emb/speaker"), 0, 3);
  const Eigen::MatrixXd dur_row = plain_head(st, "dur", attr_in);
  for (int t = 0; t < 3; ++t) CHECK(attrs.log_durations[t] == doctest::Approx(dur_row(0, t)).epsilon(1e-12));

  CHECK_THROWS_WITH_AS((void)predict_attributes(st, phi, 0, 5),
                       doctest::Contains("speaker id 5 outside [0, 2)"), Error);
  CHECK_THROWS_WITH_AS((void)predict_attributes(st, phi, -1, 0),
                       doctest::Contains("accent id -1 outside"), Error);
}

TEST_CASE("model: build_context stacks the documented row blocks") {
  ModelState rt = make_state("rt");
  Rng rng(5);
  const Eigen::MatrixXd phi_f = random_matrix(rng, 8, 4);

  const ConditioningContext ctx = build_context(rt, phi_f, 1, 0, nullptr, nullptr, nullptr);
  REQUIRE(ctx.blocks.size() == 3);
  CHECK(ctx.blocks[0].first == "phi");
  CHECK(ctx.blocks[0].second == 8);
  CHECK(ctx.blocks[1].first == "accent");
  CHECK(ctx.blocks[1].second == 3);
  CHECK(ctx.blocks[2].first == "speaker");
  CHECK(ctx.blocks[2].second == 3);
  REQUIRE(ctx.values.rows() == 14);
  REQUIRE(ctx.frames() == 4);
  CHECK(max_abs_diff(ctx.values.topRows(8), phi_f) == 0.0);
  CHECK(max_abs_diff(ctx.values.middleRows(8, 3),
                     tile_col(rt.params.get("emb/accent"), 1, 4)) == 0.0);
  CHECK(max_abs_diff(ctx.values.bottomRows(3),
                     tile_col(rt.params.get("emb/speaker"), 0, 4)) == 0.0);

  ModelState rm = make_state("rm");
  const std::vector<double> f0 = {0.5, -0.25, 0.0, 1.5};
  const std::vector<double> voicing = {1.0, 1.0, 0.0, 1.0};
  const std::vector<double> energy = {-0.5, 0.25, 0.75, -1.0};
  const ConditioningContext rm_ctx = build_context(rm, phi_f, 0, 1, &f0, &voicing, &energy);
  REQUIRE(rm_ctx.blocks.size() == 6);
  CHECK(rm_ctx.blocks[3].first == "f0");
  CHECK(rm_ctx.blocks[4].first == "voicing");
  CHECK(rm_ctx.blocks[5].first == "energy");
  REQUIRE(rm_ctx.values.rows() == 17);
  CHECK(max_abs_diff(rm_ctx.values.row(14), row_of(f0)) == 0.0);
  CHECK(max_abs_diff(rm_ctx.values.row(15), row_of(voicing)) == 0.0);
  CHECK(max_abs_diff(rm_ctx.values.row(16), row_of(energy)) == 0.0);

  CHECK_THROWS_WITH_AS((void)build_context(rm, phi_f, 0, 1, nullptr, nullptr, nullptr),
                       doctest::Contains("rm mode requires f0, voicing and energy context"),
                       Error);
  const std::vector<double> short_f0 = {0.5, -0.25, 0.0};
  CHECK_THROWS_WITH_AS((void)build_context(rm, phi_f, 0, 1, &short_f0, &voicing, &energy),
                       doctest::Contains("context block 'f0' has 3 frames, expected 4"), Error);
}

TEST_CASE("model: flow is the identity at initialization") {
  ModelState st = make_state("rt");
  Rng rng(19);
  const Eigen::MatrixXd mel = random_matrix(rng, 6, 5, 2.0);
  const ConditioningContext ctx =
      build_context(st, random_matrix(rng, 8, 5), 0, 0, nullptr, nullptr, nullptr);

  const FlowEval fe = flow_forward_nll(st, mel, ctx);
  CHECK(max_abs_diff(fe.z, mel) == 0.0);
  CHECK(fe.logdet == 0.0);
  const double dim = 6.0 * 5.0;
  const double expected_nll =
      (0.5 * mel.squaredNorm() + 0.5 * dim * std::log(2.0 * M_PI)) / dim;
  CHECK(fe.nll == doctest::Approx(expected_nll).epsilon(1e-12));
  CHECK(max_abs_diff(flow_inverse(st, mel, ctx), mel) == 0.0);
}

TEST_CASE("model: flow inverse reconstructs and logdet matches a numerical Jacobian") {
  ModelState st = make_state("rt");
  perturb_params(&st, 11);
  Rng rng(12);
  const Eigen::MatrixXd mel = random_matrix(rng, 6, 5, 2.0);
  const ConditioningContext ctx =
      build_context(st, random_matrix(rng, 8, 5), 1, 1, nullptr, nullptr, nullptr);

  const FlowEval fe = flow_forward_nll(st, mel, ctx);
  CHECK(max_abs_diff(fe.z, mel) > 1e-3);  // genuinely non-identity now
  CHECK(max_abs_diff(flow_inverse(st, fe.z, ctx), mel) < 1e-9);

  // Inverse direction round trip.
  const Eigen::MatrixXd z0 = random_matrix(rng, 6, 5);
  const Eigen::MatrixXd decoded = flow_inverse(st, z0, ctx);
  CHECK(max_abs_diff(flow_forward_nll(st, decoded, ctx).z, z0) < 1e-9);

  // NLL is assembled from z and logdet exactly as documented.
  const double dim = 6.0 * 5.0;
  const double recomputed =
      (0.5 * fe.z.squaredNorm() + 0.5 * dim * std::log(2.0 * M_PI) - fe.logdet) / dim;
  CHECK(fe.nll == doctest::Approx(recomputed).epsilon(1e-12));

  // Single frame: logdet equals log|det J| of the frame map, by central FD.
  const Eigen::MatrixXd m0 = random_matrix(rng, 6, 1, 1.5);
  const ConditioningContext ctx1 =
      build_context(st, random_matrix(rng, 8, 1), 0, 1, nullptr, nullptr, nullptr);
  const FlowEval fe1 = flow_forward_nll(st, m0, ctx1);
  const double h = 1e-5;
  Eigen::MatrixXd jac(6, 6);
  for (int j = 0; j < 6; ++j) {
    Eigen::MatrixXd plus = m0;
    Eigen::MatrixXd minus = m0;
    plus(j, 0) += h;
    minus(j, 0) -= h;
    jac.col(j) = (flow_forward_nll(st, plus, ctx1).z - flow_forward_nll(st, minus, ctx1).z) /
                 (2.0 * h);
  }
  const double numeric_logdet = std::log(std::abs(jac.determinant()));
  CHECK(fe1.logdet == doctest::Approx(numeric_logdet).epsilon(1e-5));

  const ConditioningContext ctx3 =
      build_context(st, random_matrix(rng, 8, 3), 0, 0, nullptr, nullptr, nullptr);
  CHECK_THROWS_WITH_AS((void)flow_forward_nll(st, mel, ctx3),
                       doctest::Contains("context has 3 frames, mel has 5"), Error);

  Eigen::MatrixXd poisoned = mel;
  poisoned(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS((void)flow_forward_nll(st, poisoned, ctx),
                       doctest::Contains("non-finite"), Error);
}

TEST_CASE("model: synthesize respects mode, speaker stats, and seeds") {
  ModelState st = make_state("rm");

  SynthesisRequest req;
  req.ipa_text = "ab a";
  req.speaker_id = 0;
  req.accent_id = 1;

  // At initialization everything is neutral: one frame per token, zero mel,
  // and prosody equal to the target speaker / corpus means.
  const SynthesisResult r = synthesize(st, req);
  REQUIRE(r.token_ids.size() == 4);  // a b <space> a
  REQUIRE(r.durations.size() == 4);
  for (int d : r.durations) CHECK(d == 1);
  CHECK(r.mel.n_mels == 6);
  CHECK(r.mel.frames == 4);
  CHECK(r.mel.sample_rate == st.config.features.sample_rate);
  REQUIRE(r.mel.values.size() == 24);
  for (float v : r.mel.values) CHECK(v == 0.0f);
  REQUIRE(r.f0_hz.size() == 4);
  REQUIRE(r.energy.size() == 4);
  for (double f : r.f0_hz) CHECK(f == 150.0);    // spk0 mean + std * 0
  for (double e : r.energy) CHECK(e == -3.0);    // corpus mean + std * 0

  SynthesisRequest req1 = req;
  req1.speaker_id = 1;
  const SynthesisResult r1 = synthesize(st, req1);
  for (double f : r1.f0_hz) CHECK(f == 210.0);

  perturb_params(&st, 23);
  const SynthesisResult a1 = synthesize(st, req);
  const SynthesisResult a2 = synthesize(st, req);
  REQUIRE(a1.mel.values.size() == a2.mel.values.size());
  CHECK(a1.mel.values == a2.mel.values);
  CHECK(static_cast<int>(a1.f0_hz.size()) == a1.mel.frames);

  SynthesisRequest noisy = req;
  noisy.sigma = 0.8;
  noisy.seed = 3;
  const SynthesisResult n1 = synthesize(st, noisy);
  const SynthesisResult n2 = synthesize(st, noisy);
  CHECK(n1.mel.values == n2.mel.values);
  noisy.seed = 4;
  const SynthesisResult n3 = synthesize(st, noisy);
  CHECK(n1.mel.values != n3.mel.values);

  SynthesisRequest wrong_mode = req;
  wrong_mode.mode = "rt";
  CHECK_THROWS_WITH_AS(
      (void)synthesize(st, wrong_mode),
      doctest::Contains("checkpoint was trained in 'rm' mode; cannot synthesize in 'rt' mode"),
      Error);
  SynthesisRequest bad_mode = req;
  bad_mode.mode = "xx";
  CHECK_THROWS_WITH_AS((void)synthesize(st, bad_mode),
                       doctest::Contains("mode must be 'rt' or 'rm'"), Error);
  SynthesisRequest bad_sigma = req;
  bad_sigma.sigma = -0.1;
  CHECK_THROWS_WITH_AS((void)synthesize(st, bad_sigma),
                       doctest::Contains("sigma must be nonnegative"), Error);
  SynthesisRequest bad_speaker = req;
  bad_speaker.speaker_id = 7;
  CHECK_THROWS_WITH_AS((void)synthesize(st, bad_speaker),
                       doctest::Contains("speaker id 7 outside"), Error);

  // RT checkpoints expose no prosody tracks.
  ModelState rt = make_state("rt");
  const SynthesisResult rt_res = synthesize(rt, req);
  CHECK(rt_res.f0_hz.empty());
  CHECK(rt_res.energy.empty());
  CHECK(rt_res.mel.frames == 4);
}

TEST_CASE("model: build_batch_graph matches a plain recomputation term by term") {
  ModelState st = make_state("rm");
  perturb_params(&st, 301);
  st.config.losses.w_adv = 0.5;
  const ParamStore& p = st.params;
  const LossWeights& w = st.config.losses;

  Rng rng(302);
  const int a = st.inventory.id_of("a");
  const int b = st.inventory.id_of("b");
  FeatureCacheEntry e = make_entry(st, rng, "utt0", {a, b, a}, 7, 1, 0);

  BatchGraph graph;
  const double prior_weight = 0.7;
  build_batch_graph(st, {&e}, prior_weight, &graph);

  // Single-entry batch: every recorded term is that utterance's own loss.
  REQUIRE(graph.terms.count("mel_nll") == 1);
  REQUIRE(graph.terms.count("align") == 1);
  REQUIRE(graph.terms.count("duration") == 1);
  REQUIRE(graph.terms.count("f0") == 1);
  REQUIRE(graph.terms.count("energy") == 1);
  REQUIRE(graph.terms.count("var") == 1);
  REQUIRE(graph.terms.count("covar") == 1);
  REQUIRE(graph.terms.count("adv") == 1);
  CHECK(graph.terms.count("xcorr") == 0);  // needs a batch of >= 2
  CHECK(max_abs_diff(graph.r_abs, Eigen::MatrixXd::Zero(3, 3)) == 0.0);

  // Alignment: soft attention scores + scaled prior, forward-sum per frame.
  const Eigen::MatrixXd phi = encode_text(st, e.token_ids, e.accent_id);
  Eigen::MatrixXd key_in(11, 3);
  key_in.topRows(8) = phi;
  key_in.bottomRows(3) = tile_col(p.get("emb/accent"), e.accent_id, 3);
  const Eigen::MatrixXd keys = affine(p.get("attn/key_w"), p.get("attn/key_b"), key_in);
  const Eigen::MatrixXd queries =
      affine(p.get("attn/query_w"), p.get("attn/query_b"), mel_matrix(e.mel));
  Eigen::MatrixXd log_probs = column_log_softmax(
      neg_sqdist_scores(keys.transpose(), queries.transpose()));
  log_probs += prior_weight *
               beta_binomial_log_prior(3, 7, st.config.training.align_prior_scale);
  const ForwardSumResult fs = forward_sum_nll(log_probs, /*with_grad=*/false);
  CHECK(graph.terms.at("align") == doctest::Approx(fs.nll / 7.0).epsilon(1e-9));

  // Mel NLL: flow over the context gathered along the hard alignment.
  const std::vector<int> path = viterbi_path(log_probs);
  const std::vector<int> durations = durations_from_path(path, 3);
  Eigen::MatrixXd phi_frames(8, 7);
  for (int f = 0; f < 7; ++f) phi_frames.col(f) = phi.col(path[f]);
  const std::vector<double> f0_ctx = plain_f0_context(st, e);
  const std::vector<double> voicing = plain_voicing(e);
  const std::vector<double> energy_ctx = plain_energy_context(st, e);
  const ConditioningContext ctx =
      build_context(st, phi_frames, e.accent_id, e.speaker_id, &f0_ctx, &voicing, &energy_ctx);
  const FlowEval fe = flow_forward_nll(st, mel_matrix(e.mel), ctx);
  CHECK(graph.terms.at("mel_nll") == doctest::Approx(fe.nll).epsilon(1e-9));

  // Duration: L1 between the dur head and log(1 + viterbi durations).
  const AttributePrediction attrs = predict_attributes(st, phi, e.accent_id, e.speaker_id);
  double dur_l1 = 0.0;
  for (int t = 0; t < 3; ++t) {
    dur_l1 += std::abs(attrs.log_durations[t] - std::log(1.0 + durations[t]));
  }
  CHECK(graph.terms.at("duration") == doctest::Approx(dur_l1 / 3.0).epsilon(1e-12));

  // Prosody heads: MSE against the standardized context tracks.
  Eigen::MatrixXd frame_in(14, 7);
  frame_in.topRows(8) = phi_frames;
  frame_in.middleRows(8, 3) = tile_col(p.get("emb/accent"), e.accent_id, 7);
  frame_in.bottomRows(3) = tile_col(p.get("emb/speaker"), e.speaker_id, 7);
  const Eigen::MatrixXd f0_pred = plain_head(st, "f0", frame_in);
  const Eigen::MatrixXd energy_pred = plain_head(st, "energy", frame_in);
  CHECK(graph.terms.at("f0") ==
        doctest::Approx((f0_pred - row_of(f0_ctx)).squaredNorm() / 7.0).epsilon(1e-9));
  CHECK(graph.terms.at("energy") ==
        doctest::Approx((energy_pred - row_of(energy_ctx)).squaredNorm() / 7.0).epsilon(1e-9));

  // Table regularizers straight from the loss library.
  Eigen::MatrixXd g_unused;
  const double var_plain =
      variance_loss(p.get("emb/accent"), w.gamma, w.epsilon, &g_unused) +
      variance_loss(p.get("emb/speaker"), w.gamma, w.epsilon, &g_unused);
  const double covar_plain = covariance_loss(p.get("emb/accent"), &g_unused) +
                             covariance_loss(p.get("emb/speaker"), &g_unused);
  CHECK(graph.terms.at("var") == doctest::Approx(var_plain).epsilon(1e-12));
  CHECK(graph.terms.at("covar") == doctest::Approx(covar_plain).epsilon(1e-12));

  // Adversarial head sees the time-pooled encoding (GRL is identity forward).
  const Eigen::MatrixXd pooled = phi.rowwise().mean();
  const Eigen::MatrixXd logits = affine(p.get("adv/w"), p.get("adv/b"), pooled);
  const double adv_plain = softmax_cross_entropy(logits, {e.speaker_id}, &g_unused);
  CHECK(graph.terms.at("adv") == doctest::Approx(adv_plain).epsilon(1e-12));

  // No hidden terms: the total is exactly the weighted sum of the parts.
  const double total_plain = graph.terms.at("mel_nll") + graph.terms.at("align") +
                             graph.terms.at("duration") + graph.terms.at("f0") +
                             graph.terms.at("energy") + w.w_var * graph.terms.at("var") +
                             w.w_covar * graph.terms.at("covar") +
                             w.w_adv * graph.terms.at("adv");
  CHECK(graph.terms.at("total") == doctest::Approx(total_plain).epsilon(1e-9));
}

TEST_CASE("model: batch cross-correlation term matches the loss library") {
  ModelState st = make_state("rm");
  perturb_params(&st, 311);
  const ParamStore& p = st.params;

  Rng rng(312);
  const int a = st.inventory.id_of("a");
  const int b = st.inventory.id_of("b");
  FeatureCacheEntry e1 = make_entry(st, rng, "utt1", {a, b}, 6, 1, 0);
  FeatureCacheEntry e2 = make_entry(st, rng, "utt2", {b, a, a}, 8, 0, 1);

  BatchGraph graph;
  build_batch_graph(st, {&e1, &e2}, 0.0, &graph);
  REQUIRE(graph.terms.count("xcorr") == 1);

  Eigen::MatrixXd batch_a(3, 2), batch_s(3, 2);
  batch_a.col(0) = p.get("emb/accent").col(0);
  batch_a.col(1) = p.get("emb/accent").col(1);
  batch_s.col(0) = p.get("emb/speaker").col(1);
  batch_s.col(1) = p.get("emb/speaker").col(0);
  Eigen::MatrixXd r;
  const double plain = cross_correlation_loss(
      batch_a, batch_s, p.get("emb/accent").rowwise().mean(),
      p.get("emb/speaker").rowwise().mean(), nullptr, nullptr, &r);
  CHECK(graph.terms.at("xcorr") == doctest::Approx(plain).epsilon(1e-12));
  CHECK(max_abs_diff(graph.r_abs, r.cwiseAbs()) < 1e-15);

  // Weighted into the total alongside the other terms.
  const LossWeights& w = st.config.losses;
  const double total_plain =
      graph.terms.at("mel_nll") + graph.terms.at("align") + graph.terms.at("duration") +
      graph.terms.at("f0") + graph.terms.at("energy") + w.w_var * graph.terms.at("var") +
      w.w_covar * graph.terms.at("covar") + w.w_xcorr * graph.terms.at("xcorr");
  CHECK(graph.terms.at("total") == doctest::Approx(total_plain).epsilon(1e-9));

  BatchGraph empty_graph;
  CHECK_THROWS_WITH_AS(build_batch_graph(st, {}, 0.0, &empty_graph),
                       doctest::Contains("empty batch"), Error);

  FeatureCacheEntry tiny = make_entry(st, rng, "tiny", {a, b, a}, 2, 0, 0);
  BatchGraph tiny_graph;
  CHECK_THROWS_WITH_AS(build_batch_graph(st, {&tiny}, 0.0, &tiny_graph),
                       doctest::Contains("audio too short to align"), Error);

  FeatureCacheEntry poisoned = make_entry(st, rng, "nan", {a, b}, 6, 0, 0);
  poisoned.energy.values[2] = std::numeric_limits<float>::quiet_NaN();
  BatchGraph bad_graph;
  CHECK_THROWS_WITH_AS(build_batch_graph(st, {&poisoned}, 0.0, &bad_graph),
                       doctest::Contains("non-finite"), Error);
}

TEST_CASE("model: batch graph gradients agree with finite differences") {
  ModelState st = make_state("rm");
  perturb_params(&st, 401);
  st.config.losses.w_adv = 0.5;

  Rng rng(402);
  const int a = st.inventory.id_of("a");
  const int b = st.inventory.id_of("b");
  FeatureCacheEntry e1 = make_entry(st, rng, "fd1", {a, b}, 6, 0, 1);
  FeatureCacheEntry e2 = make_entry(st, rng, "fd2", {b, a, a}, 7, 1, 0);
  const std::vector<const FeatureCacheEntry*> batch = {&e1, &e2};

  BatchGraph graph;
  build_batch_graph(st, batch, 0.5, &graph);
  graph.tape.backward(graph.total);

  // Every parameter gets a gradient of its own shape (the trainer reads all).
  for (const std::string& name : st.params.names()) {
    const Eigen::MatrixXd& g = graph.tape.grad(graph.param_vars.at(name));
    CHECK(g.rows() == st.params.get(name).rows());
    CHECK(g.cols() == st.params.get(name).cols());
  }

  struct Probe {
    const char* name;
    int r;
    int c;
  };
  const std::vector<Probe> probes = {
      {"emb/token", 0, 1},     {"emb/accent", 1, 0},      {"emb/speaker", 2, 1},
      {"enc/w1", 0, 3},        {"enc/b1", 2, 0},          {"attn/key_w", 1, 4},
      {"attn/query_w", 0, 2},  {"flow/pre_logscale", 3, 0}, {"flow/s00/w1", 2, 5},
      {"flow/s01/w2", 1, 3},   {"dur/w1", 4, 2},          {"f0/w2", 0, 6},
      {"energy/b1", 5, 0},     {"adv/w", 1, 3},
  };
  const double h = 1e-5;
  for (const Probe& probe : probes) {
    CAPTURE(probe.name);
    CAPTURE(probe.r);
    CAPTURE(probe.c);
    const double analytic = graph.tape.grad(graph.param_vars.at(probe.name))(probe.r, probe.c);
    double& entry = st.params.get(probe.name)(probe.r, probe.c);
    const double saved = entry;
    entry = saved + h;
    BatchGraph plus;
    build_batch_graph(st, batch, 0.5, &plus);
    entry = saved - h;
    BatchGraph minus;
    build_batch_graph(st, batch, 0.5, &minus);
    entry = saved;
    const double fd = (plus.terms.at("total") - minus.terms.at("total")) / (2.0 * h);
    const double scale = std::max({1e-4, std::abs(fd), std::abs(analytic)});
    if (std::max(std::abs(fd), std::abs(analytic)) < 1e-4) {
      CHECK(std::abs(fd - analytic) < 1e-6);
    } else {
      CHECK(std::abs(fd - analytic) / scale < 1e-4);
    }
  }

  // Disconnected heads still report (zero) gradients so the trainer can
  // update every parameter unconditionally.
  st.config.losses.w_adv = 0.0;
  BatchGraph no_adv;
  build_batch_graph(st, batch, 0.5, &no_adv);
  no_adv.tape.backward(no_adv.total);
  CHECK(no_adv.terms.count("adv") == 0);
  CHECK(no_adv.tape.grad(no_adv.param_vars.at("adv/w")).cwiseAbs().maxCoeff() == 0.0);
}

namespace {

std::vector<FeatureCacheEntry> make_training_set(const ModelState& st, uint64_t seed) {
  Rng rng(seed);
  const int a = st.inventory.id_of("a");
  const int b = st.inventory.id_of("b");
  std::vector<FeatureCacheEntry> data;
  data.push_back(make_entry(st, rng, "tr0", {a, b}, 6, 0, 0));
  data.push_back(make_entry(st, rng, "tr1", {b, a, a}, 8, 1, 1));
  data.push_back(make_entry(st, rng, "tr2", {a, a}, 7, 0, 1));
  data.push_back(make_entry(st, rng, "tr3", {b, b, a}, 9, 1, 0));
  return data;
}

}  // namespace

TEST_CASE("model: train_model reduces the loss deterministically") {
  ModelState st = make_state("rm");
  const std::vector<FeatureCacheEntry> data = make_training_set(st, 501);

  CHECK_THROWS_WITH_AS((void)train_model(&st, {}, 5), doctest::Contains("no training data"),
                       Error);
  const std::vector<FeatureCacheEntry> single(data.begin(), data.begin() + 1);
  CHECK_THROWS_WITH_AS(
      (void)train_model(&st, single, 5),
      doctest::Contains("cross-correlation loss needs batches of >= 2 utterances; got 1"),
      Error);

  std::vector<std::string> log_lines;
  TrainSummary summary = train_model(&st, data, 30, "", [&](int, const std::string& line) {
    log_lines.push_back(line);
  });
  CHECK(summary.steps == 30);
  REQUIRE(summary.loss_trace.size() == 30);
  for (double v : summary.loss_trace) CHECK(std::isfinite(v));
  CHECK(summary.final_total < summary.initial_total);
  CHECK(summary.initial_total == summary.loss_trace.front());
  CHECK(summary.final_total == summary.loss_trace.back());
  for (const char* key : {"mel_nll", "align", "duration", "f0", "energy", "var", "covar",
                          "xcorr", "total"}) {
    CHECK(summary.initial_terms.count(key) == 1);
    CHECK(summary.final_terms.count(key) == 1);
  }
  CHECK(summary.final_epoch_mean_r_fro > 0.0);
  CHECK(std::isfinite(summary.final_epoch_mean_r_fro));
  REQUIRE(!log_lines.empty());
  CHECK(log_lines.front().find("step 0 total") != std::string::npos);

  // Bit-identical re-run from a fresh init.
  ModelState st2 = make_state("rm");
  const TrainSummary summary2 = train_model(&st2, data, 30);
  REQUIRE(summary2.loss_trace.size() == summary.loss_trace.size());
  for (size_t i = 0; i < summary.loss_trace.size(); ++i) {
    CHECK(summary.loss_trace[i] == summary2.loss_trace[i]);
  }
  for (const std::string& name : st.params.names()) {
    CHECK(max_abs_diff(st.params.get(name), st2.params.get(name)) == 0.0);
  }
}

TEST_CASE("model: interval checkpoints are written during training") {
  ModelState st = make_state("rm");
  st.config.training.checkpoint_interval = 10;
  const std::vector<FeatureCacheEntry> data = make_training_set(st, 502);
  TempDir dir("ckpt");
  (void)train_model(&st, data, 20, dir.path());
  CHECK(std::filesystem::exists(dir.file("checkpoint_step10.mmtb")));
  // The final step is the caller's checkpoint, not an interval one.
  CHECK_FALSE(std::filesystem::exists(dir.file("checkpoint_step20.mmtb")));
}

TEST_CASE("model: checkpoints round trip and reject tampering") {
  ModelState st = make_state("rm");
  const std::vector<FeatureCacheEntry> data = make_training_set(st, 503);
  (void)train_model(&st, data, 10);

  TempDir dir("roundtrip");
  const std::string path = dir.file("final.mmtb");
  save_checkpoint(st, path);
  const ModelState loaded = load_checkpoint(path);

  CHECK(loaded.config.emit() == st.config.emit());
  CHECK(loaded.inventory.serialize() == st.inventory.serialize());
  CHECK(loaded.speaker_names == st.speaker_names);
  CHECK(loaded.accent_names == st.accent_names);
  CHECK(loaded.language_names == st.language_names);
  CHECK(loaded.stats.energy_mean == st.stats.energy_mean);
  CHECK(loaded.stats.energy_std == st.stats.energy_std);
  REQUIRE(loaded.stats.speakers.size() == st.stats.speakers.size());
  for (size_t i = 0; i < st.stats.speakers.size(); ++i) {
    CHECK(loaded.stats.speakers[i].speaker_id == st.stats.speakers[i].speaker_id);
    CHECK(loaded.stats.speakers[i].mean_hz == st.stats.speakers[i].mean_hz);
    CHECK(loaded.stats.speakers[i].std_hz == st.stats.speakers[i].std_hz);
    CHECK(loaded.stats.speakers[i].n_voiced_frames == st.stats.speakers[i].n_voiced_frames);
  }
  CHECK(loaded.params.names() == st.params.names());
  for (const std::string& name : st.params.names()) {
    CHECK(max_abs_diff(loaded.params.get(name), st.params.get(name)) == 0.0);
  }

  // Synthesis from the loaded state is bit-identical.
  SynthesisRequest req;
  req.ipa_text = "ba ab";
  req.speaker_id = 1;
  req.accent_id = 0;
  const SynthesisResult orig = synthesize(st, req);
  const SynthesisResult redo = synthesize(loaded, req);
  CHECK(orig.mel.values == redo.mel.values);
  CHECK(orig.f0_hz == redo.f0_hz);
  CHECK(orig.durations == redo.durations);

  // A checkpoint whose config text was edited after signing must be refused.
  TensorBundle bundle = TensorBundle::load(path);
  std::string config_text = bundle.get_bytes("config");
  config_text += "\n# edited\n";
  bundle.put_bytes("config", config_text);
  const std::string tampered = dir.file("tampered.mmtb");
  bundle.save(tampered);
  CHECK_THROWS_WITH_AS((void)load_checkpoint(tampered),
                       doctest::Contains("config hash mismatch"), Error);

  // Random bundles are not checkpoints.
  TensorBundle not_ckpt;
  not_ckpt.put_bytes("meta", "{}");
  const std::string bogus = dir.file("bogus.mmtb");
  not_ckpt.save(bogus);
  CHECK_THROWS_WITH_AS((void)load_checkpoint(bogus),
                       doctest::Contains("not a checkpoint file"), Error);
}
