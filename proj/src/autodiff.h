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

#ifndef MMTTS_SRC_AUTODIFF_H_
#define MMTTS_SRC_AUTODIFF_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmtts {

// Reverse-mode tape over dense double matrices. Ops append nodes whose
// inputs always have smaller ids, so reversing creation order is a valid
// topological order for backprop. Scalars are 1x1 matrices.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var leaf(Eigen::MatrixXd value, bool requires_grad = true);
  Var constant(Eigen::MatrixXd value) { return leaf(std::move(value), false); }
  Var scalar(double value) { return constant(Eigen::MatrixXd::Constant(1, 1, value)); }

  const Eigen::MatrixXd& value(Var v) const;
  const Eigen::MatrixXd& grad(Var v) const;
  size_t size() const { return nodes_.size(); }
  void clear();

  // Elementwise / linear algebra.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var cwise_mul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var tanh(Var a);
  Var exp(Var a);

  // Shape plumbing.
  Var vcat(Var a, Var b);
  Var hcat(const std::vector<Var>& parts);
  Var slice_rows(Var a, int start, int count);
  // Column gather with repetition; gradients accumulate per source column.
  Var gather_cols(Var a, std::vector<int> ids);
  Var add_colvec(Var x, Var v);  // v is D x 1, broadcast over columns
  Var sub_colvec(Var x, Var v);
  Var mean_cols(Var x);  // D x 1

  // Reductions.
  Var sum_all(Var x);
  Var sum_squares(Var x);
  Var mean_abs_error(Var pred, Var target);      // L1, subgradient 0 at kinks
  Var mean_squared_error(Var pred, Var target);  // L2

  // Identity forward, -lambda * gradient backward.
  Var gradient_reversal(Var x, double lambda);

  // Mean negative log-softmax over columns; labels are constants.
  Var cross_entropy(Var logits, std::vector<int> labels);

  // scores(t, f) = -||keys.col(t) - queries.col(f)||^2 from d x T and d x F.
  Var neg_sqdist(Var keys, Var queries);
  Var col_log_softmax(Var x);
  // Scalar monotonic-alignment NLL; gradient is -posterior occupancy.
  Var forward_sum(Var log_probs);

  // Embedding-table regularizers as single nodes with analytic gradients.
  Var variance_hinge(Var table, double gamma, double epsilon);
  Var covariance_sq(Var table);

  void backward(Var output);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void(Tape*, const Eigen::MatrixXd&)> backward;
  };
  Var push(Eigen::MatrixXd value, bool requires_grad,
           std::function<void(Tape*, const Eigen::MatrixXd&)> backward);
  void accumulate(Var v, const Eigen::MatrixXd& g);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  friend struct TapeTestPeer;
};

using Var = Tape::Var;

// Named parameter set with Adam state. Map iteration order is the name
// order, which keeps updates bit-reproducible run to run.
class ParamStore {
 public:
  Eigen::MatrixXd& create(const std::string& name, Eigen::MatrixXd init);
  Eigen::MatrixXd& get(const std::string& name);
  const Eigen::MatrixXd& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;
  std::map<std::string, Eigen::MatrixXd>& values() { return values_; }
  const std::map<std::string, Eigen::MatrixXd>& values() const { return values_; }

  void adam_step(const std::map<std::string, Eigen::MatrixXd>& grads, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

 private:
  std::map<std::string, Eigen::MatrixXd> values_;
  std::map<std::string, Eigen::MatrixXd> m_;
  std::map<std::string, Eigen::MatrixXd> v_;
  int64_t step_ = 0;
};

}  // namespace mmtts

#endif  // MMTTS_SRC_AUTODIFF_H_
