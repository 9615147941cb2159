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

#ifndef MMTTS_SRC_ALIGN_H_
#define MMTTS_SRC_ALIGN_H_

#include <vector>

#include <Eigen/Dense>

namespace mmtts {

// Matrices are [tokens x frames] throughout: row t, column f.

// scores(t, f) = -||keys.row(t) - queries.row(f)||^2. Keys are per-token
// encodings, queries per-frame encodings; both are [rows x d].
Eigen::MatrixXd neg_sqdist_scores(const Eigen::MatrixXd& keys, const Eigen::MatrixXd& queries);

// Log-softmax over tokens within each frame column.
Eigen::MatrixXd column_log_softmax(const Eigen::MatrixXd& scores);

// log BetaBinomial(k = t; n = T-1, alpha = scaling*(f+1), beta = scaling*(F-f))
// for every cell. Wider scaling concentrates mass near the diagonal.
Eigen::MatrixXd beta_binomial_log_prior(int n_tokens, int n_frames, double scaling);

struct ForwardSumResult {
  double nll = 0.0;
  // d nll / d log_probs = -posterior occupancy; filled when requested.
  Eigen::MatrixXd grad_log_probs;
};

// Negative log marginal likelihood of all monotonic paths through
// log_probs that start at token 0, end at the last token, and move 0 or 1
// token per frame. Requires frames >= tokens.
ForwardSumResult forward_sum_nll(const Eigen::MatrixXd& log_probs, bool with_grad);

// Most probable monotonic path, one token index per frame. Ties between
// staying and advancing resolve toward staying.
std::vector<int> viterbi_path(const Eigen::MatrixXd& log_probs);

// Per-token frame counts; every frame is assigned to exactly one token.
std::vector<int> durations_from_path(const std::vector<int>& path, int n_tokens);

}  // namespace mmtts

#endif  // MMTTS_SRC_ALIGN_H_
