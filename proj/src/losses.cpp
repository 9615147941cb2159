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

#include "losses.h"

#include <cmath>

#include "util.h"

namespace mmtts {

namespace {

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& m) {
  return m.colwise() - m.rowwise().mean();
}

}  // namespace

TableStats table_stats(const Eigen::MatrixXd& table) {
  const Eigen::Index n = table.cols();
  if (n < 2) {
    fail(StatusCode::kInvalidArgument, "table stats need at least 2 columns, got ", n);
  }
  TableStats stats;
  stats.mean = table.rowwise().mean();
  const Eigen::MatrixXd centered = table.colwise() - stats.mean;
  stats.cov = centered * centered.transpose() / static_cast<double>(n - 1);
  return stats;
}

double variance_loss(const Eigen::MatrixXd& table, double gamma, double epsilon,
                     Eigen::MatrixXd* grad) {
  const TableStats stats = table_stats(table);
  const Eigen::Index d = table.rows();
  const Eigen::Index n = table.cols();
  const Eigen::MatrixXd centered = table.colwise() - stats.mean;

  double loss = 0.0;
  if (grad) grad->setZero(d, n);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double std_i = std::sqrt(stats.cov(i, i) + epsilon);
    const double margin = gamma - std_i;
    if (margin <= 0.0) continue;  // hinge inactive (and 0 exactly at the kink)
    loss += margin;
    if (grad) {
      grad->row(i) = -centered.row(i) / (d * (n - 1) * std_i);
    }
  }
  return loss / static_cast<double>(d);
}

double covariance_loss(const Eigen::MatrixXd& table, Eigen::MatrixXd* grad) {
  const TableStats stats = table_stats(table);
  Eigen::MatrixXd off = stats.cov;
  off.diagonal().setZero();
  const double loss = off.squaredNorm();
  if (grad) {
    const Eigen::Index n = table.cols();
    const Eigen::MatrixXd centered = table.colwise() - stats.mean;
    // dL/dCov = 2*off (symmetric, zero diagonal); centering washes out of the
    // chain rule because the centered rows sum to zero.
    *grad = (2.0 / (n - 1)) * (2.0 * off) * centered;
  }
  return loss;
}

double cross_correlation_loss(const Eigen::MatrixXd& batch_accent,
                              const Eigen::MatrixXd& batch_speaker,
                              const Eigen::VectorXd& mean_accent,
                              const Eigen::VectorXd& mean_speaker,
                              Eigen::MatrixXd* grad_accent, Eigen::MatrixXd* grad_speaker,
                              Eigen::MatrixXd* r_out) {
  const Eigen::Index b = batch_accent.cols();
  if (b < 2) {
    fail(StatusCode::kInvalidArgument, "cross-correlation needs batch size >= 2, got ", b);
  }
  if (batch_speaker.cols() != b) {
    fail(StatusCode::kInvalidArgument, "accent batch has ", b, " columns but speaker batch has ",
         batch_speaker.cols());
  }
  if (batch_accent.rows() != mean_accent.size() || batch_speaker.rows() != mean_speaker.size()) {
    fail(StatusCode::kInvalidArgument, "table mean dimension does not match batch rows");
  }
  const Eigen::Index da = batch_accent.rows();
  const Eigen::Index ds = batch_speaker.rows();
  const Eigen::MatrixXd a = batch_accent.colwise() - mean_accent;
  const Eigen::MatrixXd s = batch_speaker.colwise() - mean_speaker;
  const Eigen::MatrixXd r = a * s.transpose() / static_cast<double>(b - 1);
  const double scale = 1.0 / static_cast<double>(da * ds);
  const double loss = scale * r.squaredNorm();
  if (grad_accent) *grad_accent = (2.0 * scale / (b - 1)) * r * s;
  if (grad_speaker) *grad_speaker = (2.0 * scale / (b - 1)) * r.transpose() * a;
  if (r_out) *r_out = r;
  return loss;
}

double softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                             Eigen::MatrixXd* grad_logits) {
  const Eigen::Index k = logits.rows();
  const Eigen::Index b = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != b) {
    fail(StatusCode::kInvalidArgument, "got ", labels.size(), " labels for ", b, " columns");
  }
  double loss = 0.0;
  if (grad_logits) grad_logits->setZero(k, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const int y = labels[j];
    if (y < 0 || y >= k) {
      fail(StatusCode::kInvalidArgument, "label ", y, " outside [0, ", k, ")");
    }
    const double m = logits.col(j).maxCoeff();
    const Eigen::ArrayXd shifted = logits.col(j).array() - m;
    const double lse = m + std::log(shifted.exp().sum());
    loss += lse - logits(y, j);
    if (grad_logits) {
      grad_logits->col(j) = (logits.col(j).array() - lse).exp() / static_cast<double>(b);
      (*grad_logits)(y, j) -= 1.0 / static_cast<double>(b);
    }
  }
  return loss / static_cast<double>(b);
}

}  // namespace mmtts
