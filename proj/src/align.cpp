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

#include "align.h"

#include <cmath>
#include <limits>

#include "util.h"

namespace mmtts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_beta_fn(double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); }

}  // namespace

Eigen::MatrixXd neg_sqdist_scores(const Eigen::MatrixXd& keys, const Eigen::MatrixXd& queries) {
  if (keys.cols() != queries.cols()) {
    fail(StatusCode::kInvalidArgument, "key dim ", keys.cols(), " != query dim ", queries.cols());
  }
  const Eigen::Index t_count = keys.rows();
  const Eigen::Index f_count = queries.rows();
  Eigen::MatrixXd scores(t_count, f_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (Eigen::Index f = 0; f < f_count; ++f) {
      scores(t, f) = -(keys.row(t) - queries.row(f)).squaredNorm();
    }
  }
  return scores;
}

Eigen::MatrixXd column_log_softmax(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index f = 0; f < scores.cols(); ++f) {
    const double m = scores.col(f).maxCoeff();
    const double lse = m + std::log((scores.col(f).array() - m).exp().sum());
    out.col(f) = scores.col(f).array() - lse;
  }
  return out;
}

Eigen::MatrixXd beta_binomial_log_prior(int n_tokens, int n_frames, double scaling) {
  if (n_tokens < 1 || n_frames < 1) {
    fail(StatusCode::kInvalidArgument, "prior needs at least one token and one frame");
  }
  if (scaling <= 0.0) {
    fail(StatusCode::kInvalidArgument, "prior scaling must be positive, got ", scaling);
  }
  const int n = n_tokens - 1;
  Eigen::MatrixXd prior(n_tokens, n_frames);
  for (int f = 0; f < n_frames; ++f) {
    const double alpha = scaling * (f + 1);
    const double beta = scaling * (n_frames - f);
    const double log_norm = log_beta_fn(alpha, beta);
    for (int k = 0; k < n_tokens; ++k) {
      const double log_comb =
          std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
      prior(k, f) = log_comb + log_beta_fn(k + alpha, n - k + beta) - log_norm;
    }
  }
  return prior;
}

ForwardSumResult forward_sum_nll(const Eigen::MatrixXd& log_probs, bool with_grad) {
  const Eigen::Index t_count = log_probs.rows();
  const Eigen::Index f_count = log_probs.cols();
  if (t_count < 1 || f_count < 1) {
    fail(StatusCode::kInvalidArgument, "forward sum needs a non-empty matrix");
  }
  if (f_count < t_count) {
    fail(StatusCode::kInvalidArgument, "monotonic alignment impossible: ", t_count, " tokens but only ",
         f_count, " frames");
  }

  Eigen::MatrixXd log_alpha = Eigen::MatrixXd::Constant(t_count, f_count, kNegInf);
  log_alpha(0, 0) = log_probs(0, 0);
  for (Eigen::Index f = 1; f < f_count; ++f) {
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const double stay = log_alpha(t, f - 1);
      const double advance = t > 0 ? log_alpha(t - 1, f - 1) : kNegInf;
      log_alpha(t, f) = log_probs(t, f) + log_add_exp(stay, advance);
    }
  }
  const double log_z = log_alpha(t_count - 1, f_count - 1);
  if (!std::isfinite(log_z)) {
    fail(StatusCode::kNumericError, "forward sum underflowed to -inf");
  }

  ForwardSumResult result;
  result.nll = -log_z;
  if (!with_grad) return result;

  Eigen::MatrixXd log_beta = Eigen::MatrixXd::Constant(t_count, f_count, kNegInf);
  log_beta(t_count - 1, f_count - 1) = 0.0;
  for (Eigen::Index f = f_count - 2; f >= 0; --f) {
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const double stay = log_beta(t, f + 1) + log_probs(t, f + 1);
      const double advance =
          t + 1 < t_count ? log_beta(t + 1, f + 1) + log_probs(t + 1, f + 1) : kNegInf;
      log_beta(t, f) = log_add_exp(stay, advance);
    }
  }
  result.grad_log_probs.resize(t_count, f_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (Eigen::Index f = 0; f < f_count; ++f) {
      const double lp = log_alpha(t, f) + log_beta(t, f) - log_z;
      result.grad_log_probs(t, f) = lp == kNegInf ? 0.0 : -std::exp(lp);
    }
  }
  return result;
}

std::vector<int> viterbi_path(const Eigen::MatrixXd& log_probs) {
  const Eigen::Index t_count = log_probs.rows();
  const Eigen::Index f_count = log_probs.cols();
  if (f_count < t_count || t_count < 1) {
    fail(StatusCode::kInvalidArgument, "viterbi needs frames >= tokens >= 1");
  }
  Eigen::MatrixXd best = Eigen::MatrixXd::Constant(t_count, f_count, kNegInf);
  Eigen::MatrixXi came_from = Eigen::MatrixXi::Zero(t_count, f_count);  // 0 stay, 1 advance
  best(0, 0) = log_probs(0, 0);
  for (Eigen::Index f = 1; f < f_count; ++f) {
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const double stay = best(t, f - 1);
      const double advance = t > 0 ? best(t - 1, f - 1) : kNegInf;
      // >= keeps ties on "stay", which biases toward longer early tokens.
      if (stay >= advance) {
        best(t, f) = log_probs(t, f) + stay;
        came_from(t, f) = 0;
      } else {
        best(t, f) = log_probs(t, f) + advance;
        came_from(t, f) = 1;
      }
    }
  }
  std::vector<int> path(f_count);
  Eigen::Index t = t_count - 1;
  for (Eigen::Index f = f_count - 1; f >= 0; --f) {
    path[f] = static_cast<int>(t);
    if (f > 0 && came_from(t, f) == 1) --t;
  }
  if (path.front() != 0) {
    fail(StatusCode::kInternal, "viterbi path does not start at token 0");
  }
  return path;
}

std::vector<int> durations_from_path(const std::vector<int>& path, int n_tokens) {
  std::vector<int> durations(n_tokens, 0);
  for (int t : path) {
    if (t < 0 || t >= n_tokens) {
      fail(StatusCode::kInvalidArgument, "path token ", t, " outside [0, ", n_tokens, ")");
    }
    ++durations[t];
  }
  return durations;
}

}  // namespace mmtts
