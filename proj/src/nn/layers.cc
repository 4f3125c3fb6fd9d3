// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/nn/layers.h"

namespace told::nn {

namespace {

// Uniform(-limit, limit) init with limit = sqrt(1 / fan_in).
Mat uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  double limit = std::sqrt(1.0 / std::max(fan_in, 1));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

Tensor ParamStore::add(const std::string& name, const Mat& init) {
  require(!index_.count(name), "duplicate parameter name: " + name);
  Tensor t = Tensor::leaf(init, /*requires_grad=*/true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter: " + name);
  return entries_[it->second].second;
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) > 0;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries_)
    n += static_cast<int64_t>(t.rows()) * t.cols();
  return n;
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in, int out,
               Rng& rng) {
  weight = store.add(prefix + ".weight", uniform_init(in, out, in, rng));
  bias = store.add(prefix + ".bias", Mat::Zero(1, out));
}

Tensor Linear::forward(const Tensor& x) const {
  return add_rowvec(matmul(x, weight), bias);
}

Lstm::Lstm(ParamStore& store, const std::string& prefix, int in, int hidden,
           Rng& rng)
    : input_dim(in), hidden_dim(hidden) {
  wx = store.add(prefix + ".wx", uniform_init(in, 4 * hidden, in, rng));
  wh = store.add(prefix + ".wh",
                 uniform_init(hidden, 4 * hidden, hidden, rng));
  Mat b = Mat::Zero(1, 4 * hidden);
  // forget-gate bias starts at 1
  for (int j = hidden; j < 2 * hidden; ++j) b(0, j) = 1.0;
  bias = store.add(prefix + ".bias", b);
}

Lstm::State Lstm::initial_state() const {
  return {Tensor::zeros(1, hidden_dim), Tensor::zeros(1, hidden_dim)};
}

Lstm::State Lstm::step(const Tensor& x_row, const State& prev) const {
  Tensor gates = add_rowvec(
      add(matmul(x_row, wx), matmul(prev.h, wh)), bias);
  Tensor i_gate = sigmoid(slice_cols(gates, 0, hidden_dim));
  Tensor f_gate = sigmoid(slice_cols(gates, hidden_dim, hidden_dim));
  Tensor g_gate = tanh_op(slice_cols(gates, 2 * hidden_dim, hidden_dim));
  Tensor o_gate = sigmoid(slice_cols(gates, 3 * hidden_dim, hidden_dim));
  State next;
  next.c = add(cmul(f_gate, prev.c), cmul(i_gate, g_gate));
  next.h = cmul(o_gate, tanh_op(next.c));
  return next;
}

Tensor Lstm::run(const Tensor& x, State* final_state,
                 const State* init) const {
  require(x.cols() == input_dim, "lstm: input dim mismatch");
  // one shared input projection for all steps
  Tensor xw = add_rowvec(matmul(x, wx), bias);
  State state = init ? *init : initial_state();
  std::vector<Tensor> outputs;
  outputs.reserve(x.rows());
  for (int t = 0; t < x.rows(); ++t) {
    Tensor gates = add(slice_rows(xw, t, 1), matmul(state.h, wh));
    Tensor i_gate = sigmoid(slice_cols(gates, 0, hidden_dim));
    Tensor f_gate = sigmoid(slice_cols(gates, hidden_dim, hidden_dim));
    Tensor g_gate = tanh_op(slice_cols(gates, 2 * hidden_dim, hidden_dim));
    Tensor o_gate = sigmoid(slice_cols(gates, 3 * hidden_dim, hidden_dim));
    state.c = add(cmul(f_gate, state.c), cmul(i_gate, g_gate));
    state.h = cmul(o_gate, tanh_op(state.c));
    outputs.push_back(state.h);
  }
  if (final_state) *final_state = state;
  return concat_rows(outputs);
}

LayerNormParams::LayerNormParams(ParamStore& store, const std::string& prefix,
                                 int dim) {
  gamma = store.add(prefix + ".gamma", Mat::Ones(1, dim));
  beta = store.add(prefix + ".beta", Mat::Zero(1, dim));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store,
                                       const std::string& prefix, int dim,
                                       int n_heads, Rng& rng)
    : heads(n_heads),
      q(store, prefix + ".q", dim, dim, rng),
      k(store, prefix + ".k", dim, dim, rng),
      v(store, prefix + ".v", dim, dim, rng),
      out(store, prefix + ".out", dim, dim, rng) {
  require(dim % n_heads == 0, "attention dim must be divisible by heads");
}

Tensor MultiHeadAttention::forward(const Tensor& x) const {
  int dim = x.cols();
  int head_dim = dim / heads;
  Tensor qs = q.forward(x);
  Tensor ks = k.forward(x);
  Tensor vs = v.forward(x);
  std::vector<Tensor> contexts;
  contexts.reserve(heads);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(qs, h * head_dim, head_dim);
    Tensor kh = slice_cols(ks, h * head_dim, head_dim);
    Tensor vh = slice_cols(vs, h * head_dim, head_dim);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    Tensor attn = softmax_rows(scores);
    contexts.push_back(matmul(attn, vh));
  }
  return out.forward(concat_cols(contexts));
}

TransformerBlock::TransformerBlock(ParamStore& store,
                                   const std::string& prefix, int dim,
                                   int heads, int ff_dim, double dropout,
                                   Rng& rng)
    : ln1(store, prefix + ".ln1", dim),
      ln2(store, prefix + ".ln2", dim),
      attn(store, prefix + ".attn", dim, heads, rng),
      ff1(store, prefix + ".ff1", dim, ff_dim, rng),
      ff2(store, prefix + ".ff2", ff_dim, dim, rng),
      dropout_p(dropout) {}

Tensor TransformerBlock::forward(const Tensor& x, Rng* drop_rng,
                                 bool training) const {
  Tensor a = attn.forward(ln1.forward(x));
  if (training && drop_rng) a = dropout(a, dropout_p, *drop_rng, true);
  Tensor h = add(x, a);
  Tensor f = ff2.forward(relu(ff1.forward(ln2.forward(h))));
  if (training && drop_rng) f = dropout(f, dropout_p, *drop_rng, true);
  return add(h, f);
}

Conv1d::Conv1d(ParamStore& store, const std::string& prefix, int in, int out,
               int k, Rng& rng)
    : kernel(k), in_dim(in), out_dim(out) {
  require(k >= 1 && k % 2 == 1, "conv1d: kernel must be odd");
  weight =
      store.add(prefix + ".weight", uniform_init(k * in, out, k * in, rng));
  bias = store.add(prefix + ".bias", Mat::Zero(1, out));
}

Tensor Conv1d::forward(const Tensor& x) const {
  require(x.cols() == in_dim, "conv1d: input dim mismatch");
  int center = kernel / 2;
  Tensor acc;
  for (int j = 0; j < kernel; ++j) {
    Tensor tap = slice_rows(weight, j * in_dim, in_dim);
    Tensor shifted = (j == center) ? x : shift_rows(x, center - j);
    Tensor term = matmul(shifted, tap);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return add_rowvec(acc, bias);
}

Tensor stat_pool_all(const Tensor& x, double eps) {
  Tensor mu = mean_rows(x);
  Tensor centered = sub_rowvec(x, mu);
  Tensor var = mean_rows(square(centered));
  Tensor sd = sqrt_op(add_scalar(var, eps));
  return concat_cols({mu, sd});
}

Tensor windowed_stat_pool(const Tensor& x, int window, double eps) {
  require(window >= 1, "windowed_stat_pool: window must be >= 1");
  int t_len = x.rows();
  int half = window / 2;
  std::vector<Tensor> rows;
  rows.reserve(t_len);
  for (int t = 0; t < t_len; ++t) {
    int lo = std::max(0, t - half);
    int hi = std::min(t_len - 1, t + half);
    Tensor span = slice_rows(x, lo, hi - lo + 1);
    rows.push_back(stat_pool_all(span, eps));
  }
  return concat_rows(rows);
}

}  // namespace told::nn
