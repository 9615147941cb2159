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

#include "config.h"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "util.h"

namespace mmtts {

namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    fail(StatusCode::kParseError, "config key ", key, ": expected integer, got '", value, "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return static_cast<uint64_t>(v);
  } catch (const std::exception&) {
    fail(StatusCode::kParseError, "config key ", key, ": expected unsigned integer, got '",
         value, "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    if (!std::isfinite(v)) throw std::invalid_argument("nonfinite");
    return v;
  } catch (const std::exception&) {
    fail(StatusCode::kParseError, "config key ", key, ": expected number, got '", value, "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(StatusCode::kParseError, "config key ", key, ": expected true/false, got '", value, "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ToolkitConfig::set_key(const std::string& key, const std::string& value) {
  auto as_int = [&] { return parse_int(key, value); };
  auto as_double = [&] { return parse_double(key, value); };

  if (key == "sample_rate") features.sample_rate = as_int();
  else if (key == "win") features.win = as_int();
  else if (key == "hop") features.hop = as_int();
  else if (key == "n_mels") features.n_mels = as_int();
  else if (key == "fmin") features.fmin = as_double();
  else if (key == "fmax") features.fmax = as_double();
  else if (key == "f0_min") features.f0_min = as_double();
  else if (key == "f0_max") features.f0_max = as_double();
  else if (key == "voicing_threshold") features.voicing_threshold = as_double();
  else if (key == "log_floor") features.log_floor = as_double();
  else if (key == "energy_domain") features.energy_domain = value;
  else if (key == "f0_std_floor") features.f0_std_floor = as_double();
  else if (key == "gamma") losses.gamma = as_double();
  else if (key == "epsilon") losses.epsilon = as_double();
  else if (key == "w_var") losses.w_var = as_double();
  else if (key == "w_covar") losses.w_covar = as_double();
  else if (key == "w_xcorr") losses.w_xcorr = as_double();
  else if (key == "w_adv") losses.w_adv = as_double();
  else if (key == "grl_lambda") losses.grl_lambda = as_double();
  else if (key == "c_txt") model.c_txt = as_int();
  else if (key == "d_accent") model.d_accent = as_int();
  else if (key == "d_speaker") model.d_speaker = as_int();
  else if (key == "flow_steps") model.flow_steps = as_int();
  else if (key == "flow_hidden") model.flow_hidden = as_int();
  else if (key == "encoder_hidden") model.encoder_hidden = as_int();
  else if (key == "predictor_hidden") model.predictor_hidden = as_int();
  else if (key == "attn_dim") model.attn_dim = as_int();
  else if (key == "seed") training.seed = parse_u64(key, value);
  else if (key == "lr") training.lr = as_double();
  else if (key == "batch_size") training.batch_size = as_int();
  else if (key == "steps") training.steps = as_int();
  else if (key == "checkpoint_interval") training.checkpoint_interval = as_int();
  else if (key == "align_prior_scale") training.align_prior_scale = as_double();
  else if (key == "align_prior_fraction") training.align_prior_fraction = as_double();
  else if (key == "sigma") training.sigma = as_double();
  else if (key == "standardize_f0") training.standardize_f0 = parse_bool(key, value);
  else if (key == "mode") mode = value;
  else fail(StatusCode::kParseError, "unknown config key: ", key);
}

ToolkitConfig ToolkitConfig::parse(const std::string& text) {
  ToolkitConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(StatusCode::kParseError, "config line ", line_no, ": expected 'key = value'");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      fail(StatusCode::kParseError, "config line ", line_no, ": empty key");
    config.set_key(key, value);
  }
  config.validate();
  return config;
}

ToolkitConfig ToolkitConfig::load(const std::string& path) {
  return parse(read_text_file(path));
}

void ToolkitConfig::validate() const {
  if (mode != "rt" && mode != "rm")
    fail(StatusCode::kInvalidArgument, "mode must be 'rt' or 'rm', got '", mode, "'");
  if (features.sample_rate <= 0 || features.win <= 0 || features.hop <= 0 ||
      features.n_mels <= 0)
    fail(StatusCode::kInvalidArgument, "feature framing values must be positive");
  if ((features.win & (features.win - 1)) != 0)
    fail(StatusCode::kInvalidArgument, "win must be a power of two, got ", features.win);
  if (features.fmax <= features.fmin)
    fail(StatusCode::kInvalidArgument, "fmax must exceed fmin");
  if (features.fmax > features.sample_rate / 2.0)
    fail(StatusCode::kInvalidArgument, "fmax exceeds Nyquist for sample_rate ",
         features.sample_rate);
  if (features.f0_min <= 0 || features.f0_max <= features.f0_min)
    fail(StatusCode::kInvalidArgument, "need 0 < f0_min < f0_max");
  if (features.log_floor <= 0)
    fail(StatusCode::kInvalidArgument, "log_floor must be positive");
  if (features.energy_domain != "log" && features.energy_domain != "linear")
    fail(StatusCode::kInvalidArgument, "energy_domain must be 'log' or 'linear', got '",
         features.energy_domain, "'");
  if (features.f0_std_floor <= 0)
    fail(StatusCode::kInvalidArgument, "f0_std_floor must be positive");
  if (losses.gamma < 0 || losses.epsilon <= 0)
    fail(StatusCode::kInvalidArgument, "need gamma >= 0 and epsilon > 0");
  if (losses.w_var < 0 || losses.w_covar < 0 || losses.w_xcorr < 0 || losses.w_adv < 0)
    fail(StatusCode::kInvalidArgument, "loss weights must be nonnegative");
  if (model.c_txt <= 0 || model.d_accent <= 0 || model.d_speaker <= 0 ||
      model.flow_steps < 0 || model.flow_hidden <= 0 || model.encoder_hidden <= 0 ||
      model.predictor_hidden <= 0 || model.attn_dim <= 0)
    fail(StatusCode::kInvalidArgument, "model dimensions must be positive");
  if (training.lr <= 0 || training.batch_size <= 0 || training.steps < 0)
    fail(StatusCode::kInvalidArgument, "training values must be positive");
  if (losses.w_xcorr > 0 && training.batch_size < 2)
    fail(StatusCode::kInvalidArgument,
         "batch_size must be >= 2 when w_xcorr > 0 (batch cross-correlation needs B-1)");
  if (training.align_prior_fraction < 0 || training.align_prior_fraction > 1)
    fail(StatusCode::kInvalidArgument, "align_prior_fraction must be in [0, 1]");
  if (training.sigma < 0)
    fail(StatusCode::kInvalidArgument, "sigma must be nonnegative");
}

std::string ToolkitConfig::emit() const {
  std::ostringstream os;
  os << "# feature extraction\n";
  os << "sample_rate = " << features.sample_rate << "\n";
  os << "win = " << features.win << "\n";
  os << "hop = " << features.hop << "\n";
  os << "n_mels = " << features.n_mels << "\n";
  os << "fmin = " << format_double(features.fmin) << "\n";
  os << "fmax = " << format_double(features.fmax) << "\n";
  os << "f0_min = " << format_double(features.f0_min) << "\n";
  os << "f0_max = " << format_double(features.f0_max) << "\n";
  os << "voicing_threshold = " << format_double(features.voicing_threshold) << "\n";
  os << "log_floor = " << format_double(features.log_floor) << "\n";
  os << "energy_domain = " << features.energy_domain << "\n";
  os << "f0_std_floor = " << format_double(features.f0_std_floor) << "\n";
  os << "# losses\n";
  os << "gamma = " << format_double(losses.gamma) << "\n";
  os << "epsilon = " << format_double(losses.epsilon) << "\n";
  os << "w_var = " << format_double(losses.w_var) << "\n";
  os << "w_covar = " << format_double(losses.w_covar) << "\n";
  os << "w_xcorr = " << format_double(losses.w_xcorr) << "\n";
  os << "w_adv = " << format_double(losses.w_adv) << "\n";
  os << "grl_lambda = " << format_double(losses.grl_lambda) << "\n";
  os << "# model\n";
  os << "c_txt = " << model.c_txt << "\n";
  os << "d_accent = " << model.d_accent << "\n";
  os << "d_speaker = " << model.d_speaker << "\n";
  os << "flow_steps = " << model.flow_steps << "\n";
  os << "flow_hidden = " << model.flow_hidden << "\n";
  os << "encoder_hidden = " << model.encoder_hidden << "\n";
  os << "predictor_hidden = " << model.predictor_hidden << "\n";
  os << "attn_dim = " << model.attn_dim << "\n";
  os << "# training\n";
  os << "seed = " << training.seed << "\n";
  os << "lr = " << format_double(training.lr) << "\n";
  os << "batch_size = " << training.batch_size << "\n";
  os << "steps = " << training.steps << "\n";
  os << "checkpoint_interval = " << training.checkpoint_interval << "\n";
  os << "align_prior_scale = " << format_double(training.align_prior_scale) << "\n";
  os << "align_prior_fraction = " << format_double(training.align_prior_fraction) << "\n";
  os << "sigma = " << format_double(training.sigma) << "\n";
  os << "standardize_f0 = " << (training.standardize_f0 ? "true" : "false") << "\n";
  os << "mode = " << mode << "\n";
  return os.str();
}

}  // namespace mmtts
