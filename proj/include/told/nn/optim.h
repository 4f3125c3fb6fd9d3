// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TOLD_NN_OPTIM_H_
#define TOLD_NN_OPTIM_H_

#include <string>
#include <vector>

#include "told/nn/layers.h"

namespace told::nn {

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
  std::string schedule = "constant";  // "constant" | "noam"
  int warmup_steps = 0;
  int model_dim = 256;  // noam reference dimension
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, OptimizerConfig cfg);

  // Frozen parameters are excluded from clipping and never updated.
  void set_frozen(const std::vector<bool>& frozen);

  // Applies one update from the accumulated gradients; returns the lr used.
  double step();
  void zero_grad();
  int64_t step_count() const { return step_; }
  double current_lr() const;

 private:
  std::vector<Tensor> params_;
  std::vector<Mat> m_, v_;
  std::vector<bool> frozen_;
  OptimizerConfig cfg_;
  int64_t step_ = 0;
};

}  // namespace told::nn

#endif  // TOLD_NN_OPTIM_H_
