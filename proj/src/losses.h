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

#ifndef MMTTS_SRC_LOSSES_H_
#define MMTTS_SRC_LOSSES_H_

#include <vector>

#include <Eigen/Dense>

namespace mmtts {

// Embedding tables and batches are column-per-item: a D x N matrix holds N
// embeddings of dimension D.

struct TableStats {
  Eigen::VectorXd mean;  // over columns
  Eigen::MatrixXd cov;   // D x D, 1/(N-1) normalization
};

TableStats table_stats(const Eigen::MatrixXd& table);

// (1/D) sum_d max(0, gamma - sqrt(cov_dd + epsilon)). The hinge subgradient
// at exactly gamma is 0. `grad` (same shape as table) is optional.
double variance_loss(const Eigen::MatrixXd& table, double gamma, double epsilon,
                     Eigen::MatrixXd* grad = nullptr);

// sum_{i != j} cov_ij^2, both symmetric entries counted.
double covariance_loss(const Eigen::MatrixXd& table, Eigen::MatrixXd* grad = nullptr);

// R = (1/(B-1)) (A - mean_a 1^T)(S - mean_s 1^T)^T with the means taken from
// the full embedding tables (they are constants here, not batch statistics).
// Loss = ||R||_F^2 / (D_a * D_s). Gradients are w.r.t. the batch matrices.
double cross_correlation_loss(const Eigen::MatrixXd& batch_accent,
                              const Eigen::MatrixXd& batch_speaker,
                              const Eigen::VectorXd& mean_accent,
                              const Eigen::VectorXd& mean_speaker,
                              Eigen::MatrixXd* grad_accent = nullptr,
                              Eigen::MatrixXd* grad_speaker = nullptr,
                              Eigen::MatrixXd* r_out = nullptr);

// Mean negative log-softmax of the true class. logits is K x B (column per
// item); labels has B entries in [0, K).
double softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                             Eigen::MatrixXd* grad_logits = nullptr);

}  // namespace mmtts

#endif  // MMTTS_SRC_LOSSES_H_
