// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TOLD_NN_LAYERS_H_
#define TOLD_NN_LAYERS_H_

#include <string>
#include <unordered_map>
#include <vector>

#include "told/nn/tensor.h"

namespace told::nn {

// Ordered table of named parameters. Construction order is the checkpoint
// and optimizer order, so it must be deterministic.
class ParamStore {
 public:
  Tensor add(const std::string& name, const Mat& init);
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<Tensor> tensors() const;
  void zero_grad();
  int64_t total_size() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, int in, int out,
         Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Single-layer unidirectional LSTM. Gate order: input, forget, cell, output.
struct Lstm {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor wx;  // input_dim x 4h
  Tensor wh;  // hidden_dim x 4h
  Tensor bias;  // 1 x 4h

  struct State {
    Tensor h;
    Tensor c;
  };

  Lstm() = default;
  Lstm(ParamStore& store, const std::string& prefix, int in, int hidden,
       Rng& rng);
  State initial_state() const;
  State step(const Tensor& x_row, const State& prev) const;
  // Runs over all rows of x; returns the T x hidden output sequence.
  Tensor run(const Tensor& x, State* final_state = nullptr,
             const State* init = nullptr) const;
};

struct LayerNormParams {
  Tensor gamma;  // 1 x dim
  Tensor beta;   // 1 x dim

  LayerNormParams() = default;
  LayerNormParams(ParamStore& store, const std::string& prefix, int dim);
  Tensor forward(const Tensor& x) const {
    return layer_norm_rows(x, gamma, beta);
  }
};

struct MultiHeadAttention {
  int heads = 0;
  Linear q, k, v, out;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& prefix, int dim,
                     int heads, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Pre-norm transformer block; feed-forward inner dim is ff_dim.
struct TransformerBlock {
  LayerNormParams ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;
  double dropout_p = 0.0;

  TransformerBlock() = default;
  TransformerBlock(ParamStore& store, const std::string& prefix, int dim,
                   int heads, int ff_dim, double dropout, Rng& rng);
  Tensor forward(const Tensor& x, Rng* drop_rng, bool training) const;
};

// 1-D convolution along time over T x in features, zero padding at edges.
struct Conv1d {
  int kernel = 0;
  int in_dim = 0;
  int out_dim = 0;
  Tensor weight;  // (kernel * in) x out
  Tensor bias;    // 1 x out

  Conv1d() = default;
  Conv1d(ParamStore& store, const std::string& prefix, int in, int out,
         int kernel, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Mean and standard deviation over all rows -> 1 x 2C.
Tensor stat_pool_all(const Tensor& x, double eps = 1e-8);

// Per-frame statistics over the window [t - l/2, t + l/2] clipped to the
// sequence bounds -> T x 2C.
Tensor windowed_stat_pool(const Tensor& x, int window, double eps = 1e-8);

}  // namespace told::nn

#endif  // TOLD_NN_LAYERS_H_
