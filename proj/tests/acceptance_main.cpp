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
//
// Acceptance gate: one line per criterion, exit 0 iff every selected
// criterion passes. Run with no arguments for all criteria, or pass
// criterion numbers to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "acoustic_features.h"
#include "align.h"
#include "augment.h"
#include "autodiff.h"
#include "config.h"
#include "evalmetrics.h"
#include "feature_cache.h"
#include "json.hpp"
#include "losses.h"
#include "manifest.h"
#include "model.h"
#include "pipeline.h"
#include "rng.h"
#include "test_support.h"
#include "text_frontend.h"
#include "toygen.h"
#include "util.h"
#include "wav.h"

#ifndef MMTTS_CLI_PATH
#error "MMTTS_CLI_PATH must point at the mmtts CLI binary"
#endif

namespace mmtts {
namespace {

using nlohmann::json;
using testing::TempDir;

// ---------------------------------------------------------------------------
// Harness

struct Check {
  bool ok = true;
  int checks = 0;
  std::string failure;

  void expect(bool cond, const std::string& what) {
    ++checks;
    if (!cond && ok) {
      ok = false;
      failure = what;
    }
  }
};

std::string quote_arg(const std::string& s) {
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

struct CliResult {
  int exit_code = -1;
  std::string output;
};

// Runs the CLI with stdout+stderr captured to log_path.
CliResult run_cli(const std::vector<std::string>& args, const std::string& log_path) {
  std::string cmd = quote_arg(MMTTS_CLI_PATH);
  for (const std::string& a : args) cmd += " " + quote_arg(a);
  cmd += " > " + quote_arg(log_path) + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  std::ifstream in(log_path, std::ios::binary);
  result.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return result;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Shared fixtures

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  }
  return m;
}

ToolkitConfig small_config(const std::string& mode, int n_mels = 6) {
  ToolkitConfig c;
  c.mode = mode;
  c.features.n_mels = n_mels;
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

ModelState make_state(const std::string& mode, int n_mels = 6) {
  PhonemeInventory inv;
  inv.add_symbol("a");
  inv.add_symbol("b");
  CorpusStats stats;
  stats.energy_mean = -3.0;
  stats.energy_std = 2.0;
  stats.speakers.push_back({0, 150.0, 20.0, 100});
  stats.speakers.push_back({1, 210.0, 30.0, 100});
  return init_model(small_config(mode, n_mels), inv, {"spk0", "spk1"}, {"alpha", "beta"},
                    {"lang0"}, stats);
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
    e.pitch.f0_hz[f] = voiced ? static_cast<float>(st.mean_hz + rng.normal(0.0, st.std_hz)) : 0.0f;
  }
  e.energy.values.resize(frames);
  for (float& v : e.energy.values) v = static_cast<float>(rng.normal(-3.0, 2.0));
  return e;
}

double median_voiced_f0(const Waveform& wav, const FeatureConfig& config) {
  const PitchTrack track = extract_f0(wav, config);
  std::vector<double> voiced;
  for (size_t i = 0; i < track.f0_hz.size(); ++i) {
    if (track.voiced[i]) voiced.push_back(track.f0_hz[i]);
  }
  if (voiced.empty()) return 0.0;
  return testing::median_of(voiced);
}

// ---------------------------------------------------------------------------
// Criterion 1: loss exactness on hand-computed tables.

void criterion_1(Check* c) {
  Eigen::MatrixXd var_table(1, 2);
  var_table << 3.0, 3.0;
  c->expect(std::abs(variance_loss(var_table, 1.0, 1e-4) - 0.99) < 1e-12,
            "variance_loss on the identical-column table is not 0.99");

  Eigen::MatrixXd cov_table(2, 2);
  cov_table << 0.0, 2.0, 0.0, 2.0;  // columns (0,0) and (2,2)
  c->expect(std::abs(covariance_loss(cov_table) - 8.0) < 1e-12,
            "covariance_loss on the {(0,0),(2,2)} table is not 8");

  Eigen::MatrixXd acc(1, 2), spk(1, 2);
  acc << 1.0, -1.0;
  spk << 1.0, -1.0;
  const Eigen::VectorXd zero_mean = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd r;
  const double loss = cross_correlation_loss(acc, spk, zero_mean, zero_mean, nullptr, nullptr, &r);
  c->expect(std::abs(loss - 4.0) < 1e-12, "cross_correlation_loss on the D=1,B=2 hand case is not 4");
  c->expect(std::abs(r(0, 0) - 2.0) < 1e-12, "hand-case correlation entry is not 2");
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic gradients vs central finite differences.

void criterion_2(Check* c) {
  Rng rng(2026);

  // Variance hinge (Eq. 2). Regenerate any instance whose per-dimension std
  // sits on the hinge kink, where one-sided FD is meaningless.
  for (int inst = 0; inst < 20; ++inst) {
    const double gamma = 0.8 + 0.25 * (inst % 3);
    const double eps = 1e-4;
    Eigen::MatrixXd table;
    bool usable = false;
    while (!usable) {
      const int d = 2 + rng.uniform_int(4);
      const int b = 3 + rng.uniform_int(6);
      table = random_matrix(rng, d, b, 1.2);
      usable = true;
      for (int i = 0; i < d && usable; ++i) {
        const Eigen::VectorXd row = table.row(i);
        const double mu = row.mean();
        const double var = (row.array() - mu).square().sum() / (b - 1);
        if (std::abs(std::sqrt(var + eps) - gamma) < 1e-3) usable = false;
      }
    }
    Eigen::MatrixXd grad;
    (void)variance_loss(table, gamma, eps, &grad);
    const Eigen::MatrixXd fd = testing::numeric_grad(
        table, [&](const Eigen::MatrixXd& x) { return variance_loss(x, gamma, eps); });
    c->expect(testing::grad_rel_err(grad, fd) < 1e-5,
              "variance_loss gradient mismatch (instance " + std::to_string(inst) + ")");
  }

  // Covariance (Eq. 3): smooth everywhere.
  for (int inst = 0; inst < 20; ++inst) {
    const int d = 2 + rng.uniform_int(4);
    const int b = 3 + rng.uniform_int(6);
    const Eigen::MatrixXd table = random_matrix(rng, d, b, 1.0);
    Eigen::MatrixXd grad;
    (void)covariance_loss(table, &grad);
    const Eigen::MatrixXd fd = testing::numeric_grad(
        table, [&](const Eigen::MatrixXd& x) { return covariance_loss(x); });
    c->expect(testing::grad_rel_err(grad, fd) < 1e-5,
              "covariance_loss gradient mismatch (instance " + std::to_string(inst) + ")");
  }

  // Cross-correlation (Eq. 5); the batch means are treated as constants, as
  // in training where they come from the running tables.
  for (int inst = 0; inst < 20; ++inst) {
    const int da = 2 + rng.uniform_int(3);
    const int ds = 2 + rng.uniform_int(3);
    const int b = 3 + rng.uniform_int(5);
    const Eigen::MatrixXd acc = random_matrix(rng, da, b, 1.0);
    const Eigen::MatrixXd spk = random_matrix(rng, ds, b, 1.0);
    const Eigen::VectorXd mean_a = acc.rowwise().mean();
    const Eigen::VectorXd mean_s = spk.rowwise().mean();
    Eigen::MatrixXd grad_a, grad_s;
    (void)cross_correlation_loss(acc, spk, mean_a, mean_s, &grad_a, &grad_s);
    const Eigen::MatrixXd fd_a = testing::numeric_grad(acc, [&](const Eigen::MatrixXd& x) {
      return cross_correlation_loss(x, spk, mean_a, mean_s);
    });
    const Eigen::MatrixXd fd_s = testing::numeric_grad(spk, [&](const Eigen::MatrixXd& x) {
      return cross_correlation_loss(acc, x, mean_a, mean_s);
    });
    c->expect(testing::grad_rel_err(grad_a, fd_a) < 1e-5,
              "cross-correlation accent gradient mismatch (instance " + std::to_string(inst) + ")");
    c->expect(testing::grad_rel_err(grad_s, fd_s) < 1e-5,
              "cross-correlation speaker gradient mismatch (instance " + std::to_string(inst) + ")");
  }

  // Adversarial path with the gradient-reversal sign check: forward identity,
  // classifier grads untouched, encoder grads negated and scaled by lambda,
  // and the plain encoder gradient itself validated against FD.
  for (int inst = 0; inst < 20; ++inst) {
    const int din = 3 + rng.uniform_int(3);
    const int dh = 3 + rng.uniform_int(3);
    const int b = 3 + rng.uniform_int(4);
    const int k = 2 + rng.uniform_int(3);
    const double lambda = 0.4 + rng.uniform();
    const Eigen::MatrixXd x0 = random_matrix(rng, din, b, 1.0);
    const Eigen::MatrixXd w1 = random_matrix(rng, dh, din, 0.7);
    const Eigen::MatrixXd w2 = random_matrix(rng, k, dh, 0.7);
    std::vector<int> labels(b);
    for (int& l : labels) l = rng.uniform_int(k);

    const auto build = [&](const Eigen::MatrixXd& w1v, bool with_grl, Eigen::MatrixXd* gw1,
                           Eigen::MatrixXd* gw2) {
      Tape tape;
      const Var x = tape.constant(x0);
      const Var w1l = tape.leaf(w1v);
      const Var w2l = tape.leaf(w2);
      const Var h = tape.tanh(tape.matmul(w1l, x));
      const Var top = with_grl ? tape.gradient_reversal(h, lambda) : h;
      const Var loss = tape.cross_entropy(tape.matmul(w2l, top), labels);
      if (gw1 != nullptr) {
        tape.backward(loss);
        *gw1 = tape.grad(w1l);
        *gw2 = tape.grad(w2l);
      }
      return tape.value(loss)(0, 0);
    };

    Eigen::MatrixXd g1_rev, g2_rev, g1_plain, g2_plain;
    const double v_rev = build(w1, true, &g1_rev, &g2_rev);
    const double v_plain = build(w1, false, &g1_plain, &g2_plain);
    c->expect(v_rev == v_plain, "GRL is not the identity in the forward pass");
    c->expect(testing::grad_rel_err(g2_rev, g2_plain) < 1e-12,
              "GRL changed the classifier gradient");
    const Eigen::MatrixXd negated = (-lambda * g1_plain).eval();
    c->expect(testing::grad_rel_err(g1_rev, negated) < 1e-12,
              "encoder gradient through GRL is not -lambda times the plain gradient");
    const Eigen::MatrixXd fd = testing::numeric_grad(
        w1, [&](const Eigen::MatrixXd& x) { return build(x, false, nullptr, nullptr); });
    c->expect(testing::grad_rel_err(g1_plain, fd) < 1e-5,
              "adversarial encoder gradient mismatch (instance " + std::to_string(inst) + ")");
  }

  // Composite model loss: probe the largest-magnitude gradient entry of every
  // parameter against FD over full graph rebuilds.
  ModelState st = make_state("rm");
  perturb_params(&st, 77, 0.15);
  st.config.losses.w_adv = 0.5;
  Rng drng(31);
  std::vector<FeatureCacheEntry> entries;
  entries.push_back(make_entry(st, drng, "c0", {2, 3, 2}, 7, 0, 1));
  entries.push_back(make_entry(st, drng, "c1", {3, 2}, 6, 1, 0));
  const std::vector<const FeatureCacheEntry*> batch = {&entries[0], &entries[1]};
  const double prior_weight = 0.5;
  const auto total_value = [&]() {
    BatchGraph g;
    build_batch_graph(st, batch, prior_weight, &g);
    return g.tape.value(g.total)(0, 0);
  };

  BatchGraph graph;
  build_batch_graph(st, batch, prior_weight, &graph);
  graph.tape.backward(graph.total);
  int probes = 0;
  for (const std::string& name : st.params.names()) {
    const Eigen::MatrixXd an = graph.tape.grad(graph.param_vars.at(name));
    Eigen::Index pr = 0, pc = 0;
    const double mx = an.cwiseAbs().maxCoeff(&pr, &pc);
    Eigen::MatrixXd& pm = st.params.get(name);
    const double orig = pm(pr, pc);
    const double h = 1e-5;
    pm(pr, pc) = orig + h;
    const double fp = total_value();
    pm(pr, pc) = orig - h;
    const double fm = total_value();
    pm(pr, pc) = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(fd - an(pr, pc)) / std::max({1e-4, std::abs(fd), mx});
    c->expect(rel < 1e-4, "composite loss gradient mismatch for " + name);
    ++probes;
  }
  c->expect(probes >= 20, "fewer than 20 composite gradient probes");
}

// ---------------------------------------------------------------------------
// Criterion 3: alignment vs exhaustive path enumeration.

void criterion_3(Check* c) {
  Rng rng(3);
  std::vector<std::pair<int, int>> shapes;
  for (int t = 1; t <= 4; ++t) {
    for (int f = t; f <= 6; ++f) shapes.push_back({t, f});
  }
  for (int inst = 0; inst < 100; ++inst) {
    const auto [t, f] = shapes[inst % shapes.size()];
    const Eigen::MatrixXd log_probs = column_log_softmax(random_matrix(rng, t, f, 1.5));

    const double oracle_nll = testing::oracle_forward_nll(log_probs);
    const ForwardSumResult fs = forward_sum_nll(log_probs, /*with_grad=*/false);
    c->expect(std::abs(fs.nll - oracle_nll) < 1e-9,
              "forward_sum_nll differs from path enumeration at T=" + std::to_string(t) +
                  " F=" + std::to_string(f));

    const std::vector<int> path = viterbi_path(log_probs);
    c->expect(path == testing::oracle_viterbi(log_probs),
              "viterbi path differs from the enumeration argmax at T=" + std::to_string(t) +
                  " F=" + std::to_string(f));

    const std::vector<int> durations = durations_from_path(path, t);
    int sum = 0;
    bool all_positive = true;
    for (int d : durations) {
      sum += d;
      all_positive = all_positive && d >= 1;
    }
    c->expect(static_cast<int>(durations.size()) == t && sum == f && all_positive,
              "durations do not partition the frames at T=" + std::to_string(t) +
                  " F=" + std::to_string(f));
  }
}

// ---------------------------------------------------------------------------
// Criterion 4: flow reconstruction and log-det vs numerical Jacobian.

void criterion_4(Check* c) {
  ModelState st = make_state("rt");
  perturb_params(&st, 41, 0.3);
  Rng rng(44);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int frames = 1 + i % 10;
    const Eigen::MatrixXd mel = random_matrix(rng, st.config.features.n_mels, frames, 1.0);
    ConditioningContext ctx;
    ctx.values = random_matrix(rng, st.ctx_dim(), frames, 1.0);
    ctx.blocks = {{"ctx", st.ctx_dim()}};
    const FlowEval fwd = flow_forward_nll(st, mel, ctx);
    const Eigen::MatrixXd recon = flow_inverse(st, fwd.z, ctx);
    worst = std::max(worst, (recon - mel).cwiseAbs().maxCoeff());
  }
  c->expect(worst < 1e-4, "inverse(forward) reconstruction error reached " + std::to_string(worst));

  for (int n = 2; n <= 4; ++n) {
    ModelState toy = make_state("rt", n);
    perturb_params(&toy, 100 + n, 0.3);
    ConditioningContext ctx;
    ctx.values = random_matrix(rng, toy.ctx_dim(), 1, 1.0);
    ctx.blocks = {{"ctx", toy.ctx_dim()}};
    const Eigen::MatrixXd mel = random_matrix(rng, n, 1, 1.0);
    const FlowEval fwd = flow_forward_nll(toy, mel, ctx);

    Eigen::MatrixXd jac(n, n);
    const double h = 1e-5;
    for (int j = 0; j < n; ++j) {
      Eigen::MatrixXd hi = mel, lo = mel;
      hi(j, 0) += h;
      lo(j, 0) -= h;
      jac.col(j) = (flow_forward_nll(toy, hi, ctx).z - flow_forward_nll(toy, lo, ctx).z) / (2.0 * h);
    }
    const double numeric_logdet = std::log(std::abs(jac.determinant()));
    c->expect(std::abs(fwd.logdet - numeric_logdet) < 1e-5,
              "analytic log-det differs from the numerical Jacobian at dim " + std::to_string(n));
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: DSP transforms on synthetic vowels.

void criterion_5(Check* c) {
  FeatureConfig fc;

  const Waveform vowel = synth_vowel(220.0, 800.0, 1200.0, 0.6, 16000);
  const double base_f0 = median_voiced_f0(vowel, fc);
  c->expect(std::abs(base_f0 / 220.0 - 1.0) < 0.03, "pitch tracker misses the base vowel F0");

  for (const double alpha : {0.9, 1.1}) {
    const Waveform shifted = scale_f0(vowel, alpha, fc);
    const double ratio = median_voiced_f0(shifted, fc) / base_f0;
    c->expect(std::abs(ratio - alpha) < 0.03 * alpha,
              "F0 scaling by " + std::to_string(alpha) + " landed at ratio " + std::to_string(ratio));
  }

  const double n = static_cast<double>(vowel.samples.size());
  for (const double rate : {0.9, 1.1}) {
    const Waveform stretched = scale_duration(vowel, rate, fc);
    const double len_err =
        std::abs(static_cast<double>(stretched.samples.size()) - rate * n) / (rate * n);
    c->expect(len_err < 0.02,
              "duration scaling by " + std::to_string(rate) + " missed the target length");
    const double f0_ratio = median_voiced_f0(stretched, fc) / base_f0;
    c->expect(std::abs(f0_ratio - 1.0) < 0.03,
              "duration scaling by " + std::to_string(rate) + " moved F0 by " +
                  std::to_string(f0_ratio));
  }

  const Waveform low_vowel = synth_vowel(110.0, 800.0, 1200.0, 0.8, 16000);
  const double base_peak = testing::envelope_peak_hz(low_vowel, 450.0, 1500.0);
  const double low_f0 = median_voiced_f0(low_vowel, fc);
  c->expect(base_peak > 0.0, "no spectral envelope peak on the base vowel");
  for (const double beta : {0.875, 1.25}) {
    const Waveform warped = scale_formants(low_vowel, beta, fc);
    const double peak_ratio = testing::envelope_peak_hz(warped, 450.0, 1500.0) / base_peak;
    c->expect(std::abs(peak_ratio - beta) < 0.05 * beta,
              "formant scaling by " + std::to_string(beta) + " moved the envelope peak to ratio " +
                  std::to_string(peak_ratio));
    const double f0_ratio = median_voiced_f0(warped, fc) / low_f0;
    c->expect(std::abs(f0_ratio - 1.0) < 0.03,
              "formant scaling by " + std::to_string(beta) + " moved F0 by " +
                  std::to_string(f0_ratio));
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: relabeling arithmetic over the six transform strata.

void criterion_6(Check* c) {
  TempDir dir("acc6");
  ToyCorpusOptions opt;
  opt.n_speakers = 7;
  opt.n_utterances = 14;
  opt.seed = 13;
  const ToyCorpus toy = make_toy_corpus(dir.file("corpus"), opt);
  const int n_orig = static_cast<int>(toy.manifest.records.size());
  c->expect(n_orig == 14, "toy corpus did not produce 14 utterances");

  FeatureConfig fc;
  AugmentReport report;
  const DatasetManifest merged =
      augment_dataset(toy.manifest, default_augment_specs(), dir.file("aug"), fc, 99, &report);

  c->expect(merged.n_speakers() == 49, "expected exactly 49 speaker ids, got " +
                                           std::to_string(merged.n_speakers()));
  std::set<int> seen_ids;
  for (const UtteranceRecord& rec : merged.records) seen_ids.insert(rec.speaker_id);
  c->expect(static_cast<int>(seen_ids.size()) == 49,
            "expected all 49 speaker ids to appear in records");
  c->expect(static_cast<int>(merged.records.size()) == n_orig * 7,
            "merged manifest is not originals plus six strata");

  for (int t = 1; t <= 6; ++t) {
    for (int i = 0; i < n_orig; ++i) {
      const UtteranceRecord& src = merged.records[i];
      const UtteranceRecord& aug = merged.records[n_orig + (t - 1) * n_orig + i];
      c->expect(aug.accent_id == src.accent_id, "augmented accent differs from its source");
      c->expect(aug.language_id == src.language_id, "augmented language differs from its source");
      c->expect(aug.ipa_text == src.ipa_text, "augmented text differs from its source");
      c->expect(aug.speaker_id == relabel_speaker(src.speaker_id, t, 7),
                "augmented speaker id is not s + t*N");
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: per-speaker F0 standardization.

void criterion_7(Check* c) {
  FeatureConfig fc;
  std::vector<PitchTrack> tracks;
  for (int k = 0; k < 3; ++k) {
    const double mean = 120.0 + 40.0 * k;
    for (int j = 0; j < 2; ++j) {
      PitchTrack t;
      const double offsets[6] = {-25.0, -15.0, -5.0, 5.0, 15.0, 25.0};
      for (int rep = 0; rep < 2; ++rep) {
        for (const double o : offsets) {
          t.f0_hz.push_back(static_cast<float>(mean + o + 3.0 * j));
          t.voiced.push_back(1);
        }
      }
      t.f0_hz.push_back(0.0f);
      t.voiced.push_back(0);
      tracks.push_back(std::move(t));
    }
  }
  std::vector<std::pair<int, const PitchTrack*>> pairs;
  for (int k = 0; k < 3; ++k) {
    pairs.push_back({k, &tracks[2 * k]});
    pairs.push_back({k, &tracks[2 * k + 1]});
  }
  const std::vector<SpeakerPitchStats> stats = speaker_f0_stats(pairs, fc);
  c->expect(stats.size() == 3, "expected stats for 3 speakers");

  for (int k = 0; k < 3; ++k) {
    const auto it = std::find_if(stats.begin(), stats.end(),
                                 [&](const SpeakerPitchStats& s) { return s.speaker_id == k; });
    c->expect(it != stats.end(), "missing stats for speaker " + std::to_string(k));
    if (it == stats.end()) continue;

    std::vector<double> pooled;
    for (int j = 0; j < 2; ++j) {
      const PitchTrack& track = tracks[2 * k + j];
      const std::vector<float> norm = standardize_f0(track, *it, fc);
      for (size_t f = 0; f < norm.size(); ++f) {
        if (track.voiced[f]) pooled.push_back(norm[f]);
      }
    }
    double mu = 0.0;
    for (const double v : pooled) mu += v;
    mu /= static_cast<double>(pooled.size());
    double ss = 0.0;
    for (const double v : pooled) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / static_cast<double>(pooled.size()));
    c->expect(std::abs(mu) < 1e-6, "pooled standardized F0 mean is not 0 for speaker " +
                                       std::to_string(k));
    c->expect(std::abs(sd - 1.0) < 1e-6, "pooled standardized F0 std is not 1 for speaker " +
                                             std::to_string(k));

    for (int j = 0; j < 2; ++j) {
      const PitchTrack& track = tracks[2 * k + j];
      const std::vector<float> norm = standardize_f0(track, *it, fc);
      const std::vector<float> back = destandardize_f0(norm, track.voiced, *it);
      for (size_t f = 0; f < back.size(); ++f) {
        if (!track.voiced[f]) continue;
        const double rel = std::abs(back[f] - track.f0_hz[f]) / track.f0_hz[f];
        c->expect(rel < 1e-6, "de-standardization is not the inverse of standardization");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 8: toy training descends and is bit-reproducible.

void criterion_8(Check* c) {
  TempDir dir("acc8");
  const std::string corpus = dir.file("corpus");
  const CliResult gen = run_cli({"make-toy-corpus", "--out", corpus, "--speakers", "4",
                                 "--utterances", "32", "--seed", "7"},
                                dir.file("toy.log"));
  c->expect(gen.exit_code == 0, "make-toy-corpus failed: " + gen.output);

  const std::string config = corpus + "/config.cfg";
  const std::string manifest = corpus + "/manifest.txt";
  const std::string cache = dir.file("cache");
  const CliResult prep =
      run_cli({"prepare", "--config", config, "--manifest", manifest, "--cache-dir", cache},
              dir.file("prepare.log"));
  c->expect(prep.exit_code == 0, "prepare failed: " + prep.output);

  for (const std::string run : {"run1", "run2"}) {
    std::filesystem::create_directories(dir.file(run));
    const CliResult train = run_cli(
        {"train", "--config", config, "--set", "steps=200", "--cache-dir", cache, "--checkpoint",
         dir.file(run) + "/model.mmtb", "--deterministic", "--quiet"},
        dir.file(run + ".log"));
    c->expect(train.exit_code == 0, "train (" + run + ") failed: " + train.output);
  }

  const std::string trace1 = slurp(dir.file("run1") + "/model.mmtb.trace.json");
  c->expect(!trace1.empty(), "training produced no trace");
  if (!trace1.empty()) {
    const json trace = json::parse(trace1);
    const std::vector<double> loss = trace.at("loss").get<std::vector<double>>();
    c->expect(loss.size() == 200, "expected a 200-step loss trace");
    c->expect(!loss.empty() && loss.back() < loss.front(),
              "200 steps did not reduce the total loss");
  }

  c->expect(slurp(dir.file("run1") + "/model.mmtb") == slurp(dir.file("run2") + "/model.mmtb") &&
                !slurp(dir.file("run1") + "/model.mmtb").empty(),
            "checkpoints differ between identically seeded runs");
  c->expect(trace1 == slurp(dir.file("run2") + "/model.mmtb.trace.json"),
            "loss traces differ between identically seeded runs");
}

// ---------------------------------------------------------------------------
// Criterion 9: the cross-correlation penalty shrinks |R^{AS}|.

void criterion_9(Check* c) {
  TempDir dir("acc9");
  ToyCorpusOptions opt;
  opt.n_speakers = 4;
  opt.n_utterances = 32;
  opt.seed = 7;
  const ToyCorpus toy = make_toy_corpus(dir.file("corpus"), opt);
  ToolkitConfig config = ToolkitConfig::load(toy.config_path);
  config.training.steps = 200;

  const std::string cache = dir.file("cache");
  prepare_corpus(config, toy.manifest_path, cache);

  double r_fro[2] = {0.0, 0.0};
  int slot = 0;
  for (const double w_xcorr : {10.0, 0.0}) {
    ToolkitConfig run_config = config;
    run_config.losses.w_xcorr = w_xcorr;
    const std::string run_dir = dir.file(w_xcorr > 0.0 ? "reg" : "unreg");
    std::filesystem::create_directories(run_dir);
    train_from_cache(run_config, cache, run_dir + "/model.mmtb", nullptr);
    const json trace = json::parse(slurp(run_dir + "/model.mmtb.trace.json"));
    r_fro[slot++] = trace.at("final_epoch_mean_r_fro").get<double>();
  }
  c->expect(r_fro[0] > 0.0 && r_fro[1] > 0.0, "final-epoch |R_AS| norms were not recorded");
  c->expect(r_fro[0] < r_fro[1],
            "w_xcorr=10 ended at |R_AS| Frobenius " + std::to_string(r_fro[0]) +
                ", not below the unregularized " + std::to_string(r_fro[1]));
}

// ---------------------------------------------------------------------------
// Criterion 10: metric oracles.

void criterion_10(Check* c) {
  Rng rng(10);
  const std::string alphabet = "abc";
  for (int inst = 0; inst < 1000; ++inst) {
    const int ref_len = 1 + rng.uniform_int(6);
    const int hyp_len = rng.uniform_int(7);
    std::string ref, hyp;
    std::vector<uint32_t> ref_units, hyp_units;
    for (int i = 0; i < ref_len; ++i) {
      const char ch = alphabet[rng.uniform_int(3)];
      ref += ch;
      ref_units.push_back(static_cast<uint32_t>(ch));
    }
    for (int i = 0; i < hyp_len; ++i) {
      const char ch = alphabet[rng.uniform_int(3)];
      hyp += ch;
      hyp_units.push_back(static_cast<uint32_t>(ch));
    }
    const double expected = static_cast<double>(testing::oracle_levenshtein(ref_units, hyp_units)) /
                            static_cast<double>(ref_len);
    c->expect(std::abs(character_error_rate(ref, hyp) - expected) < 1e-12,
              "CER differs from the brute-force DP on '" + ref + "' vs '" + hyp + "'");
  }

  const auto vec = [](std::vector<double> values) {
    EmbeddingVector v;
    v.values = std::move(values);
    v.provider_id = "acceptance";
    return v;
  };
  c->expect(std::abs(cosine_similarity(vec({1, 0}), vec({0, 1}))) < 1e-12,
            "cosine of orthogonal vectors is not 0");
  c->expect(std::abs(cosine_similarity(vec({3, 4}), vec({4, 3})) - 24.0 / 25.0) < 1e-12,
            "cosine of (3,4),(4,3) is not 24/25");
  c->expect(std::abs(cosine_similarity(vec({1, 2}), vec({-1, -2})) + 1.0) < 1e-12,
            "cosine of anti-parallel vectors is not -1");

  for (int inst = 0; inst < 30; ++inst) {
    const int d = 2 + rng.uniform_int(7);
    std::vector<double> a(d), b(d), sa(d), sb(d);
    const double alpha = 0.25 + 3.0 * rng.uniform();
    const double beta = 0.25 + 3.0 * rng.uniform();
    for (int i = 0; i < d; ++i) {
      a[i] = rng.normal(0.0, 1.0);
      b[i] = rng.normal(0.0, 1.0);
      sa[i] = alpha * a[i];
      sb[i] = beta * b[i];
    }
    const double plain = cosine_similarity(vec(a), vec(b));
    const double scaled = cosine_similarity(vec(sa), vec(sb));
    c->expect(std::abs(plain - scaled) < 1e-12, "cosine similarity is not scale invariant");
  }
}

// ---------------------------------------------------------------------------
// Criterion 11: end-to-end CLI pipeline on the toy corpus.

void criterion_11(Check* c) {
  TempDir dir("acc11");
  const std::string corpus = dir.file("corpus");
  const CliResult gen = run_cli({"make-toy-corpus", "--out", corpus, "--speakers", "4",
                                 "--utterances", "16", "--seed", "11"},
                                dir.file("toy.log"));
  c->expect(gen.exit_code == 0, "make-toy-corpus failed: " + gen.output);

  const std::string config = corpus + "/config.cfg";
  const std::string cache = dir.file("cache");
  const CliResult prep = run_cli(
      {"prepare", "--config", config, "--manifest", corpus + "/manifest.txt", "--cache-dir", cache},
      dir.file("prepare.log"));
  c->expect(prep.exit_code == 0, "prepare failed: " + prep.output);

  const CliResult aug = run_cli(
      {"augment", "--manifest", corpus + "/manifest.txt", "--out", dir.file("aug"), "--seed", "5"},
      dir.file("augment.log"));
  c->expect(aug.exit_code == 0, "augment failed: " + aug.output);

  const CliResult prep2 = run_cli({"prepare", "--config", config, "--manifest",
                                   dir.file("aug") + "/manifest.txt", "--cache-dir", cache},
                                  dir.file("prepare2.log"));
  c->expect(prep2.exit_code == 0, "prepare on the augmented manifest failed: " + prep2.output);

  std::filesystem::create_directories(dir.file("ckpt"));
  const std::string checkpoint = dir.file("ckpt") + "/model.mmtb";
  const CliResult train =
      run_cli({"train", "--config", config, "--set", "steps=50", "--cache-dir", cache,
               "--checkpoint", checkpoint, "--quiet"},
              dir.file("train.log"));
  c->expect(train.exit_code == 0, "train failed: " + train.output);

  // First utterance's text, synthesized for spk0 in the non-native accent.
  std::string text;
  {
    std::ifstream in(corpus + "/manifest.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const size_t a = line.find('|');
      const size_t b = line.find('|', a + 1);
      if (a != std::string::npos && b != std::string::npos) text = line.substr(a + 1, b - a - 1);
      break;
    }
  }
  c->expect(!text.empty(), "could not read an utterance text from the toy manifest");

  const std::string sample = dir.file("sample.mmtb");
  const CliResult synth = run_cli({"synthesize", "--checkpoint", checkpoint, "--text", text,
                                   "--speaker", "spk0", "--accent", "beta", "--out", sample},
                                  dir.file("synth.log"));
  c->expect(synth.exit_code == 0, "synthesize failed: " + synth.output);

  const std::string items = dir.file("items.txt");
  {
    std::ofstream out(items);
    out << sample << "|spk0|beta|" << text << "\n";
  }
  const std::string report_path = dir.file("report.json");
  const CliResult eval =
      run_cli({"evaluate", "--config", config, "--manifest", items, "--references",
               corpus + "/manifest.txt", "--out", report_path},
              dir.file("evaluate.log"));
  c->expect(eval.exit_code == 0, "evaluate failed: " + eval.output);

  const std::string report_text = slurp(report_path);
  c->expect(!report_text.empty(), "evaluate wrote no report");
  if (!report_text.empty()) {
    const json report = json::parse(report_text, nullptr, /*allow_exceptions=*/false);
    c->expect(!report.is_discarded(), "report is not valid JSON");
    if (!report.is_discarded()) {
      c->expect(report.at("evaluated").get<int>() == 1, "report did not evaluate the sample");
      c->expect(report.at("skipped").get<int>() == 0, "report skipped the sample");
      const double cosine = report.at("overall").at("cosine_sim").at("mean").get<double>();
      c->expect(cosine >= -1.0 && cosine <= 1.0, "overall cosine similarity is out of range");
      c->expect(report.at("cells").is_array() && report.at("cells").size() == 1,
                "report cells are malformed");
    }
  }
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* title;
  void (*fn)(Check*);
  double limit_seconds;  // 0 = no runtime requirement
};

const Criterion kCriteria[] = {
    {1, "hand-computed loss tables reproduced exactly", criterion_1, 1.0},
    {2, "analytic gradients match finite differences", criterion_2, 60.0},
    {3, "alignment matches exhaustive path enumeration", criterion_3, 60.0},
    {4, "flow inverts and log-det matches the numerical Jacobian", criterion_4, 0.0},
    {5, "DSP transforms hit their F0/duration/formant targets", criterion_5, 120.0},
    {6, "six-stratum augmentation of 7 speakers yields 49 ids, accents preserved", criterion_6,
     0.0},
    {7, "per-speaker F0 standardization pools to zero mean, unit std and inverts", criterion_7,
     0.0},
    {8, "200-step toy training descends and is bit-reproducible", criterion_8, 300.0},
    {9, "w_xcorr=10 ends with smaller final-epoch mean |R_AS| than w_xcorr=0", criterion_9, 0.0},
    {10, "CER and cosine similarity match brute-force oracles", criterion_10, 0.0},
    {11, "prepare/augment/train/synthesize/evaluate end-to-end with a well-formed report",
     criterion_11, 300.0},
};

}  // namespace
}  // namespace mmtts

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > 11) {
      std::fprintf(stderr, "unknown criterion '%s' (expected 1..11)\n", argv[i]);
      return 2;
    }
    selected.insert(id);
  }

  bool all_ok = true;
  for (const mmtts::Criterion& criterion : mmtts::kCriteria) {
    if (!selected.empty() && selected.count(criterion.id) == 0) continue;
    mmtts::Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.fn(&check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("unhandled exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criterion.limit_seconds > 0.0) {
      check.expect(seconds < criterion.limit_seconds,
                   "runtime " + std::to_string(seconds) + "s exceeds the " +
                       std::to_string(criterion.limit_seconds) + "s limit");
    }
    std::printf("criterion %d: %s — %s [%d checks, %.1fs]\n", criterion.id,
                check.ok ? "PASS" : "FAIL", check.ok ? criterion.title : check.failure.c_str(),
                check.checks, seconds);
    std::fflush(stdout);
    all_ok = all_ok && check.ok;
  }
  return all_ok ? 0 : 1;
}
