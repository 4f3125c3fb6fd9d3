// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/nn/optim.h"

namespace told::nn {

Adam::Adam(std::vector<Tensor> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
  frozen_.assign(params_.size(), false);
}

void Adam::set_frozen(const std::vector<bool>& frozen) {
  require(frozen.size() == params_.size(), "adam: frozen mask size mismatch");
  frozen_ = frozen;
}

double Adam::current_lr() const {
  int64_t s = std::max<int64_t>(step_, 1);
  if (cfg_.schedule == "noam") {
    double warm = std::max(cfg_.warmup_steps, 1);
    double factor = std::min(std::pow(static_cast<double>(s), -0.5),
                             s * std::pow(warm, -1.5));
    return cfg_.lr * std::pow(static_cast<double>(cfg_.model_dim), -0.5) *
           factor;
  }
  if (cfg_.warmup_steps > 0 && s < cfg_.warmup_steps)
    return cfg_.lr * static_cast<double>(s) / cfg_.warmup_steps;
  return cfg_.lr;
}

double Adam::step() {
  ++step_;
  double lr = current_lr();

  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (size_t i = 0; i < params_.size(); ++i) {
      if (frozen_[i] || !params_[i].has_grad()) continue;
      sq += params_[i].grad().squaredNorm();
    }
    double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) {
      double factor = cfg_.grad_clip / norm;
      for (size_t i = 0; i < params_.size(); ++i) {
        if (frozen_[i] || !params_[i].has_grad()) continue;
        params_[i].node()->grad *= factor;
      }
    }
  }

  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params_.size(); ++i) {
    if (frozen_[i]) continue;
    Mat g = params_[i].has_grad()
                ? params_[i].grad()
                : Mat::Zero(params_[i].rows(), params_[i].cols());
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] +
            (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Mat m_hat = m_[i] / bc1;
    Mat v_hat = v_[i] / bc2;
    params_[i].mutable_value() -=
        lr * m_hat.cwiseQuotient(
                 (v_hat.array().sqrt() + cfg_.eps).matrix());
  }
  return lr;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace told::nn
