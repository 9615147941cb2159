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

#include "config.h"
#include "test_support.h"
#include "util.h"

using namespace mmtts;
using testing::TempDir;

TEST_CASE("defaults carry the documented values") {
  ToolkitConfig c;
  c.validate();
  CHECK(c.mode == "rm");
  CHECK(c.losses.w_var == 10.0);
  CHECK(c.losses.w_covar == 10.0);
  CHECK(c.losses.w_xcorr == 10.0);
  CHECK(c.losses.w_adv == 0.0);
  CHECK(c.losses.gamma == 1.0);
  CHECK(c.losses.epsilon == 1e-4);
  CHECK(c.features.sample_rate == 16000);
  CHECK(c.features.n_mels == 80);
  CHECK(c.training.batch_size == 8);
  CHECK(c.training.steps == 200);
  CHECK(c.training.standardize_f0);
}

TEST_CASE("parse(emit()) is value-identical") {
  ToolkitConfig c;
  c.features.n_mels = 12;
  c.features.energy_domain = "linear";
  c.losses.w_adv = 0.5;
  c.training.seed = 987654321;
  c.training.lr = 3.5e-4;
  c.training.standardize_f0 = false;
  c.mode = "rt";
  const std::string text = c.emit();
  ToolkitConfig back = ToolkitConfig::parse(text);
  CHECK(back.emit() == text);
  CHECK(back.features.n_mels == 12);
  CHECK(back.features.energy_domain == "linear");
  CHECK(back.losses.w_adv == 0.5);
  CHECK(back.training.seed == 987654321);
  CHECK(back.training.lr == 3.5e-4);
  CHECK_FALSE(back.training.standardize_f0);
  CHECK(back.mode == "rt");
  CHECK(back.hash() == c.hash());
}

TEST_CASE("every documented key is settable and re-emitted") {
  const char* keys[] = {
      "sample_rate", "win", "hop", "n_mels", "fmin", "fmax", "f0_min", "f0_max",
      "voicing_threshold", "log_floor", "energy_domain", "f0_std_floor", "gamma",
      "epsilon", "w_var", "w_covar", "w_xcorr", "w_adv", "grl_lambda", "c_txt",
      "d_accent", "d_speaker", "flow_steps", "flow_hidden", "encoder_hidden",
      "predictor_hidden", "attn_dim", "seed", "lr", "batch_size", "steps",
      "checkpoint_interval", "align_prior_scale", "align_prior_fraction", "sigma",
      "standardize_f0", "mode"};
  ToolkitConfig c;
  const std::string text = c.emit();
  for (const char* key : keys) {
    CAPTURE(key);
    CHECK(text.find(std::string(key) + " = ") != std::string::npos);
  }
  c.set_key("n_mels", "24");
  CHECK(c.features.n_mels == 24);
  c.set_key("mode", "rt");
  CHECK(c.mode == "rt");
  c.set_key("standardize_f0", "false");
  CHECK_FALSE(c.training.standardize_f0);
}

TEST_CASE("unknown keys and malformed lines are rejected") {
  CHECK_THROWS_WITH_AS((void)ToolkitConfig::parse("bogus_key = 1\n"),
                       doctest::Contains("unknown config key"), Error);
  CHECK_THROWS_AS((void)ToolkitConfig::parse("n_mels 80\n"), Error);
  CHECK_THROWS_AS((void)ToolkitConfig::parse("n_mels = abc\n"), Error);
  ToolkitConfig c;
  CHECK_THROWS_AS(c.set_key("w_xcor", "1"), Error);  // typo must not pass

  // Comments and blank lines are fine.
  ToolkitConfig ok = ToolkitConfig::parse("# comment\n\nn_mels = 40\n");
  CHECK(ok.features.n_mels == 40);
}

TEST_CASE("validate enforces the documented constraints") {
  ToolkitConfig c;

  c.mode = "RT";
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("mode"), Error);
  c.mode = "rt";
  c.validate();

  c = ToolkitConfig();
  c.training.batch_size = 1;  // w_xcorr defaults to 10 > 0
  CHECK_THROWS_AS(c.validate(), Error);
  c.losses.w_xcorr = 0.0;
  c.validate();  // B = 1 fine once the xcorr term is off

  c = ToolkitConfig();
  c.features.win = 1000;  // not a power of two
  CHECK_THROWS_AS(c.validate(), Error);

  c = ToolkitConfig();
  c.features.fmax = 9000.0;  // above Nyquist at 16 kHz
  CHECK_THROWS_AS(c.validate(), Error);

  c = ToolkitConfig();
  c.losses.w_var = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);

  c = ToolkitConfig();
  c.model.flow_steps = 0;  // identity flow stays a legal toy configuration
  c.validate();
  c.model.c_txt = 0;
  CHECK_THROWS_AS(c.validate(), Error);

  c = ToolkitConfig();
  c.training.align_prior_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);

  c = ToolkitConfig();
  c.features.energy_domain = "cepstral";
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config load reads files and hash tracks content") {
  TempDir dir("config");
  ToolkitConfig c;
  c.training.steps = 77;
  const std::string path = dir.file("c.cfg");
  write_text_file(path, c.emit());
  ToolkitConfig loaded = ToolkitConfig::load(path);
  CHECK(loaded.training.steps == 77);
  CHECK(loaded.hash() == c.hash());
  loaded.set_key("steps", "78");
  CHECK(loaded.hash() != c.hash());
  CHECK_THROWS_AS((void)ToolkitConfig::load(dir.file("missing.cfg")), Error);
}
