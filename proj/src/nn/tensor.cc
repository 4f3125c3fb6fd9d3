// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/nn/tensor.h"

#include <algorithm>
#include <unordered_set>

namespace told::nn {

namespace {

Tensor make_op(Mat value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  node->requires_grad = needs;
  if (needs) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(node);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor Tensor::leaf(const Mat& value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = value;
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return leaf(Mat::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar_const(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return leaf(m, false);
}

const Mat& Tensor::grad() const {
  require(node_ && node_->has_grad, "tensor has no accumulated gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  node_->has_grad = false;
  node_->grad.resize(0, 0);
}

double Tensor::scalar() const {
  require(rows() == 1 && cols() == 1, "scalar() requires a 1x1 tensor");
  return node_->value(0, 0);
}

void Tensor::backward() const {
  require(node_ != nullptr, "backward on undefined tensor");
  require(rows() == 1 && cols() == 1, "backward root must be 1x1");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS over the requires_grad subgraph; the reverse of
  // the resulting order processes every node after all of its children.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      Node* parent = top.node->parents[top.next_parent++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  Mat seed(1, 1);
  seed(0, 0) = 1.0;
  node_->accum_grad(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->has_grad) n->backward(*n);
  }
}

// --- primitive ops ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions must match");
  return make_op(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) pa.accum_grad(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accum_grad(pa.value.transpose() * n.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad);
    n.parents[1]->accum_grad(n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad);
    n.parents[1]->accum_grad(-n.grad);
  });
}

Tensor cmul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "cmul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) pa.accum_grad(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accum_grad(n.grad.cwiseProduct(pa.value));
  });
}

Tensor scale(const Tensor& a, double c) {
  return make_op(a.value() * c, {a}, [c](Node& n) {
    n.parents[0]->accum_grad(n.grad * c);
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  return make_op(a.value().array() + c, {a}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad);
  });
}

Tensor rsub_scalar(double c, const Tensor& a) {
  return make_op(c - a.value().array(), {a}, [](Node& n) {
    n.parents[0]->accum_grad(-n.grad);
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_rowvec: row must be 1 x cols(a)");
  Mat v = a.value();
  v.rowwise() += Eigen::RowVectorXd(row.value().row(0));
  return make_op(std::move(v), {a, row}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad);
    n.parents[1]->accum_grad(n.grad.colwise().sum());
  });
}

Tensor sub_rowvec(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(),
          "sub_rowvec: row must be 1 x cols(a)");
  Mat v = a.value();
  v.rowwise() -= Eigen::RowVectorXd(row.value().row(0));
  return make_op(std::move(v), {a, row}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad);
    n.parents[1]->accum_grad(-n.grad.colwise().sum());
  });
}

Tensor sigmoid(const Tensor& a) {
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_op(std::move(y), {a}, [](Node& n) {
    const auto& y = n.value.array();
    n.parents[0]->accum_grad((n.grad.array() * y * (1.0 - y)).matrix());
  });
}

Tensor tanh_op(const Tensor& a) {
  Mat y = a.value().array().tanh().matrix();
  return make_op(std::move(y), {a}, [](Node& n) {
    const auto& y = n.value.array();
    n.parents[0]->accum_grad((n.grad.array() * (1.0 - y * y)).matrix());
  });
}

Tensor relu(const Tensor& a) {
  Mat y = a.value().cwiseMax(0.0);
  return make_op(std::move(y), {a}, [](Node& n) {
    Mat mask = (n.parents[0]->value.array() > 0.0).cast<double>();
    n.parents[0]->accum_grad(n.grad.cwiseProduct(mask));
  });
}

Tensor exp_op(const Tensor& a) {
  Mat y = a.value().array().exp().matrix();
  return make_op(std::move(y), {a}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad.cwiseProduct(n.value));
  });
}

Tensor log_op(const Tensor& a) {
  require((a.value().array() > 0.0).all(), "log: inputs must be positive");
  Mat y = a.value().array().log().matrix();
  return make_op(std::move(y), {a}, [](Node& n) {
    n.parents[0]->accum_grad(
        n.grad.cwiseQuotient(n.parents[0]->value));
  });
}

Tensor sqrt_op(const Tensor& a) {
  require((a.value().array() >= 0.0).all(), "sqrt: inputs must be >= 0");
  Mat y = a.value().array().sqrt().matrix();
  return make_op(std::move(y), {a}, [](Node& n) {
    n.parents[0]->accum_grad(
        (n.grad.array() / (2.0 * n.value.array().max(1e-300))).matrix());
  });
}

Tensor square(const Tensor& a) {
  Mat y = a.value().array().square().matrix();
  return make_op(std::move(y), {a}, [](Node& n) {
    n.parents[0]->accum_grad(
        (2.0 * n.grad.array() * n.parents[0]->value.array()).matrix());
  });
}

Tensor clip(const Tensor& a, double lo, double hi) {
  Mat y = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_op(std::move(y), {a}, [lo, hi](Node& n) {
    const auto& x = n.parents[0]->value.array();
    Mat mask = ((x >= lo) && (x <= hi)).cast<double>();
    n.parents[0]->accum_grad(n.grad.cwiseProduct(mask));
  });
}

Tensor softmax_rows(const Tensor& a) {
  Mat y = a.value();
  for (int i = 0; i < y.rows(); ++i) {
    double mx = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  return make_op(std::move(y), {a}, [](Node& n) {
    // dx = y * (g - rowdot(g, y))
    Mat dx(n.value.rows(), n.value.cols());
    for (int i = 0; i < n.value.rows(); ++i) {
      double dot = n.grad.row(i).dot(n.value.row(i));
      dx.row(i) =
          n.value.row(i).cwiseProduct(n.grad.row(i)) - dot * n.value.row(i);
    }
    n.parents[0]->accum_grad(dx);
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  Mat y = a.value();
  for (int i = 0; i < y.rows(); ++i) {
    double mx = y.row(i).maxCoeff();
    Eigen::ArrayXd shifted = y.row(i).array() - mx;
    double lse = std::log(shifted.exp().sum());
    y.row(i) = (shifted - lse).matrix();
  }
  return make_op(std::move(y), {a}, [](Node& n) {
    Mat dx(n.value.rows(), n.value.cols());
    for (int i = 0; i < n.value.rows(); ++i) {
      double gsum = n.grad.row(i).sum();
      dx.row(i) =
          n.grad.row(i) - gsum * n.value.row(i).array().exp().matrix();
    }
    n.parents[0]->accum_grad(dx);
  });
}

Tensor transpose(const Tensor& a) {
  return make_op(a.value().transpose(), {a}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad.transpose());
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  int rows = parts[0].rows();
  int cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    v.block(0, off, rows, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return make_op(std::move(v), parts, [offsets](Node& n) {
    for (size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = *n.parents[i];
      if (!p.requires_grad) continue;
      p.accum_grad(n.grad.block(0, offsets[i], n.grad.rows(),
                                p.value.cols()));
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  int cols = parts[0].cols();
  int rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    v.block(off, 0, p.rows(), cols) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return make_op(std::move(v), parts, [offsets](Node& n) {
    for (size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = *n.parents[i];
      if (!p.requires_grad) continue;
      p.accum_grad(
          n.grad.block(offsets[i], 0, p.value.rows(), n.grad.cols()));
    }
  });
}

Tensor slice_cols(const Tensor& a, int col0, int n_cols) {
  require(col0 >= 0 && col0 + n_cols <= a.cols(), "slice_cols: out of range");
  return make_op(a.value().block(0, col0, a.rows(), n_cols), {a},
                 [col0, n_cols](Node& n) {
                   Mat g = Mat::Zero(n.parents[0]->value.rows(),
                                     n.parents[0]->value.cols());
                   g.block(0, col0, g.rows(), n_cols) = n.grad;
                   n.parents[0]->accum_grad(g);
                 });
}

Tensor slice_rows(const Tensor& a, int row0, int n_rows) {
  require(row0 >= 0 && row0 + n_rows <= a.rows(), "slice_rows: out of range");
  return make_op(a.value().block(row0, 0, n_rows, a.cols()), {a},
                 [row0, n_rows](Node& n) {
                   Mat g = Mat::Zero(n.parents[0]->value.rows(),
                                     n.parents[0]->value.cols());
                   g.block(row0, 0, n_rows, g.cols()) = n.grad;
                   n.parents[0]->accum_grad(g);
                 });
}

Tensor select_rows(const Tensor& a, const std::vector<int>& indices) {
  Mat v(static_cast<int>(indices.size()), a.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < a.rows(),
            "select_rows: index out of range");
    v.row(static_cast<int>(i)) = a.value().row(indices[i]);
  }
  return make_op(std::move(v), {a}, [indices](Node& n) {
    Mat g = Mat::Zero(n.parents[0]->value.rows(),
                      n.parents[0]->value.cols());
    for (size_t i = 0; i < indices.size(); ++i)
      g.row(indices[i]) += n.grad.row(static_cast<int>(i));
    n.parents[0]->accum_grad(g);
  });
}

Tensor shift_rows(const Tensor& a, int offset) {
  int rows = a.rows();
  Mat v = Mat::Zero(rows, a.cols());
  for (int t = 0; t < rows; ++t) {
    int src = t - offset;
    if (src >= 0 && src < rows) v.row(t) = a.value().row(src);
  }
  return make_op(std::move(v), {a}, [offset, rows](Node& n) {
    Mat g = Mat::Zero(rows, n.grad.cols());
    for (int t = 0; t < rows; ++t) {
      int src = t - offset;
      if (src >= 0 && src < rows) g.row(src) += n.grad.row(t);
    }
    n.parents[0]->accum_grad(g);
  });
}

Tensor sum_all(const Tensor& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return make_op(std::move(v), {a}, [](Node& n) {
    n.parents[0]->accum_grad(Mat::Constant(n.parents[0]->value.rows(),
                                           n.parents[0]->value.cols(),
                                           n.grad(0, 0)));
  });
}

Tensor mean_all(const Tensor& a) {
  double count = static_cast<double>(a.rows()) * a.cols();
  Mat v(1, 1);
  v(0, 0) = a.value().sum() / count;
  return make_op(std::move(v), {a}, [count](Node& n) {
    n.parents[0]->accum_grad(Mat::Constant(n.parents[0]->value.rows(),
                                           n.parents[0]->value.cols(),
                                           n.grad(0, 0) / count));
  });
}

Tensor mean_rows(const Tensor& a) {
  Mat v = a.value().colwise().mean();
  return make_op(std::move(v), {a}, [](Node& n) {
    int rows = static_cast<int>(n.parents[0]->value.rows());
    Mat g = (n.grad / static_cast<double>(rows)).replicate(rows, 1);
    n.parents[0]->accum_grad(g);
  });
}

Tensor sum_cols(const Tensor& a) {
  Mat v = a.value().rowwise().sum();
  return make_op(std::move(v), {a}, [](Node& n) {
    int cols = static_cast<int>(n.parents[0]->value.cols());
    n.parents[0]->accum_grad(n.grad.replicate(1, cols));
  });
}

Tensor repeat_col(const Tensor& v, int n_cols) {
  require(v.cols() == 1, "repeat_col: input must be m x 1");
  return make_op(v.value().replicate(1, n_cols), {v}, [](Node& n) {
    n.parents[0]->accum_grad(n.grad.rowwise().sum());
  });
}

Tensor div_by_scalar_tensor(const Tensor& a, const Tensor& s) {
  require(s.rows() == 1 && s.cols() == 1, "div_by_scalar_tensor: s is 1x1");
  double sv = s.value()(0, 0);
  require(sv != 0.0, "div_by_scalar_tensor: division by zero");
  return make_op(a.value() / sv, {a, s}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& ps = *n.parents[1];
    double sv = ps.value(0, 0);
    if (pa.requires_grad) pa.accum_grad(n.grad / sv);
    if (ps.requires_grad) {
      Mat g(1, 1);
      g(0, 0) = -(n.grad.cwiseProduct(n.value)).sum() / sv;
      ps.accum_grad(g);
    }
  });
}

Tensor normalize_rows(const Tensor& a, double eps) {
  Mat y = a.value();
  std::vector<double> norms(y.rows());
  for (int i = 0; i < y.rows(); ++i) {
    double norm = std::sqrt(y.row(i).squaredNorm() + eps);
    norms[i] = norm;
    y.row(i) /= norm;
  }
  return make_op(std::move(y), {a}, [norms](Node& n) {
    Mat dx(n.value.rows(), n.value.cols());
    for (int i = 0; i < n.value.rows(); ++i) {
      double dot = n.grad.row(i).dot(n.value.row(i));
      dx.row(i) = (n.grad.row(i) - dot * n.value.row(i)) / norms[i];
    }
    n.parents[0]->accum_grad(dx);
  });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols(),
          "layer_norm: gamma must be 1 x cols(x)");
  require(beta.rows() == 1 && beta.cols() == x.cols(),
          "layer_norm: beta must be 1 x cols(x)");
  int rows = x.rows(), cols = x.cols();
  Mat xhat(rows, cols);
  std::vector<double> inv_std(rows);
  for (int i = 0; i < rows; ++i) {
    double mu = x.value().row(i).mean();
    Eigen::RowVectorXd centered = x.value().row(i).array() - mu;
    double var = centered.squaredNorm() / cols;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std[i];
  }
  Mat y(rows, cols);
  for (int i = 0; i < rows; ++i)
    y.row(i) = xhat.row(i).cwiseProduct(gamma.value().row(0)) +
               beta.value().row(0);
  // keep xhat for the backward pass
  return make_op(std::move(y), {x, gamma, beta},
                 [xhat, inv_std](Node& n) {
    Node& px = *n.parents[0];
    Node& pg = *n.parents[1];
    Node& pb = *n.parents[2];
    if (pg.requires_grad) {
      Mat dgamma = (n.grad.cwiseProduct(xhat)).colwise().sum();
      pg.accum_grad(dgamma);
    }
    if (pb.requires_grad) pb.accum_grad(n.grad.colwise().sum());
    if (px.requires_grad) {
      Mat dx(n.grad.rows(), n.grad.cols());
      for (int i = 0; i < n.grad.rows(); ++i) {
        Eigen::RowVectorXd dxhat =
            n.grad.row(i).cwiseProduct(pg.value.row(0));
        double m1 = dxhat.mean();
        double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
        dx.row(i) =
            inv_std[i] *
            (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
      }
      px.accum_grad(dx);
    }
  });
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return a;
  require(p < 1.0, "dropout: p must be < 1");
  double keep = 1.0 - p;
  Mat mask(a.rows(), a.cols());
  for (int i = 0; i < mask.rows(); ++i)
    for (int j = 0; j < mask.cols(); ++j)
      mask(i, j) = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
  return make_op(a.value().cwiseProduct(mask), {a}, [mask](Node& n) {
    n.parents[0]->accum_grad(n.grad.cwiseProduct(mask));
  });
}

Tensor bce_matrix(const Tensor& probs, const Mat& targets) {
  require(probs.rows() == targets.rows() && probs.cols() == targets.cols(),
          "bce: shape mismatch");
  Tensor y = Tensor::leaf(targets);
  Tensor one_minus_y = Tensor::leaf((1.0 - targets.array()).matrix());
  Tensor pc = clip(probs, kBceEps, 1.0 - kBceEps);
  Tensor omc = clip(rsub_scalar(1.0, probs), kBceEps, 1.0 - kBceEps);
  Tensor pos = cmul(y, log_op(pc));
  Tensor neg_term = cmul(one_minus_y, log_op(omc));
  return neg(add(pos, neg_term));
}

Tensor bce_sum(const Tensor& probs, const Mat& targets) {
  return sum_all(bce_matrix(probs, targets));
}

Tensor ce_mean(const Tensor& probs, const std::vector<int>& classes) {
  require(static_cast<int>(classes.size()) == probs.rows(),
          "ce_mean: one class per row required");
  Mat onehot = Mat::Zero(probs.rows(), probs.cols());
  for (int t = 0; t < probs.rows(); ++t) {
    require(classes[t] >= 0 && classes[t] < probs.cols(),
            "ce_mean: class out of range");
    onehot(t, classes[t]) = 1.0;
  }
  Tensor lp = log_op(clip(probs, kBceEps, 1.0 - kBceEps));
  Tensor picked = cmul(Tensor::leaf(onehot), lp);
  return scale(sum_all(picked), -1.0 / probs.rows());
}

}  // namespace told::nn
