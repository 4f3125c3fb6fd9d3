// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Minimal reverse-mode autodiff over dense double matrices. Graphs are built
// dynamically per forward pass; parameters are long-lived leaf nodes.

#ifndef TOLD_NN_TENSOR_H_
#define TOLD_NN_TENSOR_H_

#include <functional>
#include <memory>
#include <vector>

#include "told/common.h"

namespace told::nn {

// Probabilities are clipped to [kBceEps, 1 - kBceEps] before any log.
constexpr double kBceEps = 1e-7;

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accum_grad(const Mat& g) {
    if (!requires_grad) return;
    if (!has_grad) {
      grad = g;
      has_grad = true;
    } else {
      grad += g;
    }
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor leaf(const Mat& value, bool requires_grad = false);
  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor scalar_const(double v);

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Mat& grad() const;
  bool has_grad() const { return node_ && node_->has_grad; }
  void zero_grad();
  int rows() const { return static_cast<int>(node_->value.rows()); }
  int cols() const { return static_cast<int>(node_->value.cols()); }
  double scalar() const;

  // Reverse pass from a 1x1 root; accumulates into every requires_grad leaf.
  void backward() const;

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// --- primitive ops ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor cmul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor rsub_scalar(double c, const Tensor& a);  // c - a
Tensor neg(const Tensor& a);
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // row is 1 x n
Tensor sub_rowvec(const Tensor& a, const Tensor& row);

Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clip(const Tensor& a, double lo, double hi);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

Tensor transpose(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int col0, int n);
Tensor slice_rows(const Tensor& a, int row0, int n);
Tensor select_rows(const Tensor& a, const std::vector<int>& indices);
// out[t] = a[t - offset], zero-filled outside
Tensor shift_rows(const Tensor& a, int offset);

Tensor sum_all(const Tensor& a);   // 1x1
Tensor mean_all(const Tensor& a);  // 1x1
Tensor mean_rows(const Tensor& a);  // column means, 1 x n
Tensor sum_cols(const Tensor& a);   // row sums, m x 1
Tensor repeat_col(const Tensor& v, int n);  // v is m x 1 -> m x n

Tensor div_by_scalar_tensor(const Tensor& a, const Tensor& s);  // s is 1x1

// Per-row L2 normalization: row / sqrt(|row|^2 + eps).
Tensor normalize_rows(const Tensor& a, double eps = 1e-12);

// Per-row layer normalization with learned gain/bias (1 x n each).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, double eps = 1e-5);

// Inverted dropout; identity when training is false.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);

// --- composite loss helpers ------------------------------------------------

// Sum over entries of -(y log p~ + (1-y) log(1-p)~), probabilities clipped.
Tensor bce_sum(const Tensor& probs, const Mat& targets);

// Elementwise BCE matrix (same shape as probs), probabilities clipped.
Tensor bce_matrix(const Tensor& probs, const Mat& targets);

// Mean over rows of -log p~[row, class].
Tensor ce_mean(const Tensor& probs, const std::vector<int>& classes);

}  // namespace told::nn

#endif  // TOLD_NN_TENSOR_H_
