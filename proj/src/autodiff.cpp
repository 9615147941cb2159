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

#include "autodiff.h"

#include <cmath>

#include "align.h"
#include "losses.h"
#include "util.h"

namespace mmtts {

Var Tape::push(Eigen::MatrixXd value, bool requires_grad,
               std::function<void(Tape*, const Eigen::MatrixXd&)> backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    fail(StatusCode::kInternal, "invalid tape var ", v.id);
  }
  return nodes_[v.id];
}

Var Tape::leaf(Eigen::MatrixXd value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

const Eigen::MatrixXd& Tape::value(Var v) const { return node(v).value; }

const Eigen::MatrixXd& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) {
    fail(StatusCode::kInternal, "grad of var ", v.id, " was never materialized; run backward()");
  }
  return n.grad;
}

void Tape::clear() { nodes_.clear(); }

void Tape::accumulate(Var v, const Eigen::MatrixXd& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

namespace {

bool same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace

Var Tape::add(Var a, Var b) {
  if (!same_shape(value(a), value(b))) {
    fail(StatusCode::kInvalidArgument, "add: shape mismatch");
  }
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  return push(value(a) + value(b), rg, [a, b](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  if (!same_shape(value(a), value(b))) {
    fail(StatusCode::kInvalidArgument, "sub: shape mismatch");
  }
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  return push(value(a) - value(b), rg, [a, b](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(a, g);
    t->accumulate(b, -g);
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, node(a).requires_grad,
              [a, s](Tape* t, const Eigen::MatrixXd& g) { t->accumulate(a, s * g); });
}

Var Tape::cwise_mul(Var a, Var b) {
  if (!same_shape(value(a), value(b))) {
    fail(StatusCode::kInvalidArgument, "cwise_mul: shape mismatch");
  }
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  return push(value(a).cwiseProduct(value(b)), rg, [a, b](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(a, g.cwiseProduct(t->value(b)));
    t->accumulate(b, g.cwiseProduct(t->value(a)));
  });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) {
    fail(StatusCode::kInvalidArgument, "matmul: inner dims ", value(a).cols(), " vs ",
         value(b).rows());
  }
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  return push(value(a) * value(b), rg, [a, b](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(a, g * t->value(b).transpose());
    t->accumulate(b, t->value(a).transpose() * g);
  });
}

Var Tape::transpose(Var a) {
  return push(value(a).transpose(), node(a).requires_grad,
              [a](Tape* t, const Eigen::MatrixXd& g) { t->accumulate(a, g.transpose()); });
}

Var Tape::tanh(Var a) {
  Eigen::MatrixXd y = value(a).array().tanh();
  const int out_id = static_cast<int>(nodes_.size());
  return push(std::move(y), node(a).requires_grad, [a, out_id](Tape* t, const Eigen::MatrixXd& g) {
    const Eigen::ArrayXXd y = t->nodes_[out_id].value.array();
    t->accumulate(a, (g.array() * (1.0 - y * y)).matrix());
  });
}

Var Tape::exp(Var a) {
  Eigen::MatrixXd y = value(a).array().exp();
  const int out_id = static_cast<int>(nodes_.size());
  return push(std::move(y), node(a).requires_grad, [a, out_id](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(a, g.cwiseProduct(t->nodes_[out_id].value));
  });
}

Var Tape::vcat(Var a, Var b) {
  if (value(a).cols() != value(b).cols()) {
    fail(StatusCode::kInvalidArgument, "vcat: column mismatch");
  }
  Eigen::MatrixXd y(value(a).rows() + value(b).rows(), value(a).cols());
  y << value(a), value(b);
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  const Eigen::Index ra = value(a).rows();
  const Eigen::Index rb = value(b).rows();
  return push(std::move(y), rg, [a, b, ra, rb](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(a, g.topRows(ra));
    t->accumulate(b, g.bottomRows(rb));
  });
}

Var Tape::hcat(const std::vector<Var>& parts) {
  if (parts.empty()) fail(StatusCode::kInvalidArgument, "hcat: no parts");
  Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) fail(StatusCode::kInvalidArgument, "hcat: row mismatch");
    cols += value(p).cols();
    rg = rg || node(p).requires_grad;
  }
  Eigen::MatrixXd y(rows, cols);
  Eigen::Index at = 0;
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::Index> widths;
  for (Var p : parts) {
    const Eigen::Index w = value(p).cols();
    y.middleCols(at, w) = value(p);
    offsets.push_back(at);
    widths.push_back(w);
    at += w;
  }
  std::vector<Var> parts_copy = parts;
  return push(std::move(y), rg,
              [parts_copy, offsets, widths](Tape* t, const Eigen::MatrixXd& g) {
                for (size_t i = 0; i < parts_copy.size(); ++i) {
                  t->accumulate(parts_copy[i], g.middleCols(offsets[i], widths[i]));
                }
              });
}

Var Tape::slice_rows(Var a, int start, int count) {
  const Eigen::MatrixXd& x = value(a);
  if (start < 0 || count < 0 || start + count > x.rows()) {
    fail(StatusCode::kInvalidArgument, "slice_rows: [", start, ", ", start + count,
         ") outside 0..", x.rows());
  }
  return push(x.middleRows(start, count), node(a).requires_grad,
              [a, start, count](Tape* t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd full = Eigen::MatrixXd::Zero(t->value(a).rows(), g.cols());
                full.middleRows(start, count) = g;
                t->accumulate(a, full);
              });
}

Var Tape::gather_cols(Var a, std::vector<int> ids) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd y(x.rows(), static_cast<Eigen::Index>(ids.size()));
  for (size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= x.cols()) {
      fail(StatusCode::kInvalidArgument, "gather_cols: id ", ids[j], " outside 0..", x.cols());
    }
    y.col(static_cast<Eigen::Index>(j)) = x.col(ids[j]);
  }
  return push(std::move(y), node(a).requires_grad,
              [a, ids = std::move(ids)](Tape* t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(t->value(a).rows(), t->value(a).cols());
                for (size_t j = 0; j < ids.size(); ++j) {
                  acc.col(ids[j]) += g.col(static_cast<Eigen::Index>(j));
                }
                t->accumulate(a, acc);
              });
}

Var Tape::add_colvec(Var x, Var v) {
  if (value(v).cols() != 1 || value(v).rows() != value(x).rows()) {
    fail(StatusCode::kInvalidArgument, "add_colvec: v must be rows(x) x 1");
  }
  Eigen::MatrixXd y = value(x).colwise() + Eigen::VectorXd(value(v).col(0));
  const bool rg = node(x).requires_grad || node(v).requires_grad;
  return push(std::move(y), rg, [x, v](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(x, g);
    t->accumulate(v, g.rowwise().sum());
  });
}

Var Tape::sub_colvec(Var x, Var v) {
  if (value(v).cols() != 1 || value(v).rows() != value(x).rows()) {
    fail(StatusCode::kInvalidArgument, "sub_colvec: v must be rows(x) x 1");
  }
  Eigen::MatrixXd y = value(x).colwise() - Eigen::VectorXd(value(v).col(0));
  const bool rg = node(x).requires_grad || node(v).requires_grad;
  return push(std::move(y), rg, [x, v](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(x, g);
    t->accumulate(v, -g.rowwise().sum());
  });
}

Var Tape::mean_cols(Var x) {
  const Eigen::Index n = value(x).cols();
  Eigen::MatrixXd y = value(x).rowwise().mean();
  return push(std::move(y), node(x).requires_grad, [x, n](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(x, (g / static_cast<double>(n)).replicate(1, n));
  });
}

Var Tape::sum_all(Var x) {
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = value(x).sum();
  return push(std::move(y), node(x).requires_grad, [x](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(x, Eigen::MatrixXd::Constant(t->value(x).rows(), t->value(x).cols(), g(0, 0)));
  });
}

Var Tape::sum_squares(Var x) {
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = value(x).squaredNorm();
  return push(std::move(y), node(x).requires_grad, [x](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(x, 2.0 * g(0, 0) * t->value(x));
  });
}

Var Tape::mean_abs_error(Var pred, Var target) {
  if (!same_shape(value(pred), value(target))) {
    fail(StatusCode::kInvalidArgument, "mean_abs_error: shape mismatch");
  }
  const double n = static_cast<double>(value(pred).size());
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = (value(pred) - value(target)).array().abs().sum() / n;
  const bool rg = node(pred).requires_grad || node(target).requires_grad;
  return push(std::move(y), rg, [pred, target, n](Tape* t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd sign =
        (t->value(pred) - t->value(target)).array().sign().matrix();  // sign(0) = 0
    t->accumulate(pred, (g(0, 0) / n) * sign);
    t->accumulate(target, (-g(0, 0) / n) * sign);
  });
}

Var Tape::mean_squared_error(Var pred, Var target) {
  if (!same_shape(value(pred), value(target))) {
    fail(StatusCode::kInvalidArgument, "mean_squared_error: shape mismatch");
  }
  const double n = static_cast<double>(value(pred).size());
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = (value(pred) - value(target)).squaredNorm() / n;
  const bool rg = node(pred).requires_grad || node(target).requires_grad;
  return push(std::move(y), rg, [pred, target, n](Tape* t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd diff = t->value(pred) - t->value(target);
    t->accumulate(pred, (2.0 * g(0, 0) / n) * diff);
    t->accumulate(target, (-2.0 * g(0, 0) / n) * diff);
  });
}

Var Tape::gradient_reversal(Var x, double lambda) {
  return push(value(x), node(x).requires_grad, [x, lambda](Tape* t, const Eigen::MatrixXd& g) {
    t->accumulate(x, -lambda * g);
  });
}

Var Tape::cross_entropy(Var logits, std::vector<int> labels) {
  Eigen::MatrixXd grad;
  const double loss = softmax_cross_entropy(value(logits), labels, &grad);
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = loss;
  return push(std::move(y), node(logits).requires_grad,
              [logits, grad = std::move(grad)](Tape* t, const Eigen::MatrixXd& g) {
                t->accumulate(logits, g(0, 0) * grad);
              });
}

Var Tape::neg_sqdist(Var keys, Var queries) {
  const Eigen::MatrixXd& k = value(keys);
  const Eigen::MatrixXd& q = value(queries);
  if (k.rows() != q.rows()) {
    fail(StatusCode::kInvalidArgument, "neg_sqdist: feature dims ", k.rows(), " vs ", q.rows());
  }
  const Eigen::Index t_count = k.cols();
  const Eigen::Index f_count = q.cols();
  Eigen::MatrixXd y(t_count, f_count);
  for (Eigen::Index i = 0; i < t_count; ++i) {
    for (Eigen::Index j = 0; j < f_count; ++j) {
      y(i, j) = -(k.col(i) - q.col(j)).squaredNorm();
    }
  }
  const bool rg = node(keys).requires_grad || node(queries).requires_grad;
  return push(std::move(y), rg, [keys, queries](Tape* t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& k = t->value(keys);
    const Eigen::MatrixXd& q = t->value(queries);
    const Eigen::VectorXd row_sums = g.rowwise().sum();
    const Eigen::VectorXd col_sums = g.colwise().sum();
    t->accumulate(keys, -2.0 * (k * row_sums.asDiagonal() - q * g.transpose()));
    t->accumulate(queries, 2.0 * (k * g - q * col_sums.asDiagonal()));
  });
}

Var Tape::col_log_softmax(Var x) {
  const Eigen::MatrixXd& in = value(x);
  Eigen::MatrixXd y(in.rows(), in.cols());
  for (Eigen::Index f = 0; f < in.cols(); ++f) {
    const double m = in.col(f).maxCoeff();
    const double lse = m + std::log((in.col(f).array() - m).exp().sum());
    y.col(f) = in.col(f).array() - lse;
  }
  const int out_id = static_cast<int>(nodes_.size());
  return push(std::move(y), node(x).requires_grad,
              [x, out_id](Tape* t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& y = t->nodes_[out_id].value;
                Eigen::MatrixXd gx(g.rows(), g.cols());
                for (Eigen::Index f = 0; f < g.cols(); ++f) {
                  const double gsum = g.col(f).sum();
                  gx.col(f) = g.col(f).array() - y.col(f).array().exp() * gsum;
                }
                t->accumulate(x, gx);
              });
}

Var Tape::forward_sum(Var log_probs) {
  const ForwardSumResult result = forward_sum_nll(value(log_probs), /*with_grad=*/true);
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = result.nll;
  return push(std::move(y), node(log_probs).requires_grad,
              [log_probs, grad = result.grad_log_probs](Tape* t, const Eigen::MatrixXd& g) {
                t->accumulate(log_probs, g(0, 0) * grad);
              });
}

Var Tape::variance_hinge(Var table, double gamma, double epsilon) {
  Eigen::MatrixXd grad;
  const double loss = variance_loss(value(table), gamma, epsilon, &grad);
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = loss;
  return push(std::move(y), node(table).requires_grad,
              [table, grad = std::move(grad)](Tape* t, const Eigen::MatrixXd& g) {
                t->accumulate(table, g(0, 0) * grad);
              });
}

Var Tape::covariance_sq(Var table) {
  Eigen::MatrixXd grad;
  const double loss = covariance_loss(value(table), &grad);
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = loss;
  return push(std::move(y), node(table).requires_grad,
              [table, grad = std::move(grad)](Tape* t, const Eigen::MatrixXd& g) {
                t->accumulate(table, g(0, 0) * grad);
              });
}

void Tape::backward(Var output) {
  const Node& out = node(output);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    fail(StatusCode::kInvalidArgument, "backward() needs a scalar output, got ",
         out.value.rows(), "x", out.value.cols());
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[output.id].grad = Eigen::MatrixXd::Constant(1, 1, 1.0);
  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || !n.requires_grad) continue;
    if (n.grad.size() == 0 || n.grad.isZero(0.0)) continue;
    n.backward(this, n.grad);
  }
}

Eigen::MatrixXd& ParamStore::create(const std::string& name, Eigen::MatrixXd init) {
  if (values_.count(name)) {
    fail(StatusCode::kInvalidArgument, "parameter '", name, "' already exists");
  }
  m_[name] = Eigen::MatrixXd::Zero(init.rows(), init.cols());
  v_[name] = Eigen::MatrixXd::Zero(init.rows(), init.cols());
  return values_[name] = std::move(init);
}

Eigen::MatrixXd& ParamStore::get(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) fail(StatusCode::kNotFound, "unknown parameter '", name, "'");
  return it->second;
}

const Eigen::MatrixXd& ParamStore::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) fail(StatusCode::kNotFound, "unknown parameter '", name, "'");
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return values_.count(name) > 0; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : values_) out.push_back(name);
  return out;
}

void ParamStore::adam_step(const std::map<std::string, Eigen::MatrixXd>& grads, double lr,
                           double beta1, double beta2, double eps) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (const auto& [name, g] : grads) {
    auto it = values_.find(name);
    if (it == values_.end()) fail(StatusCode::kNotFound, "adam: unknown parameter '", name, "'");
    Eigen::MatrixXd& m = m_[name];
    Eigen::MatrixXd& v = v_[name];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd m_hat = m.array() / bc1;
    const Eigen::ArrayXXd v_hat = v.array() / bc2;
    it->second.array() -= lr * m_hat / (v_hat.sqrt() + eps);
  }
}

}  // namespace mmtts
