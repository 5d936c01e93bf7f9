// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace flamed::nn {

Adam::Adam(ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.rows(), p.var.cols());
    v_.emplace_back(p.var.rows(), p.var.cols());
  }
}

void Adam::zero_grad() {
  // Allocating every buffer makes unused parameters see a zero gradient, so
  // their moments decay the same way whether or not a run was resumed.
  for (auto& p : params_) p.var.grad_buffer().fill(0.0);
}

double Adam::current_lr() const {
  if (step_ < cfg_.warmup_steps) {
    return cfg_.lr * static_cast<double>(step_ + 1) / static_cast<double>(cfg_.warmup_steps);
  }
  if (cfg_.decay_steps <= cfg_.warmup_steps) return cfg_.lr;
  const double frac = std::min(1.0, static_cast<double>(step_ - cfg_.warmup_steps) /
                                        static_cast<double>(cfg_.decay_steps - cfg_.warmup_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  return cfg_.lr * (cfg_.min_lr_ratio + (1.0 - cfg_.min_lr_ratio) * cosine);
}

double Adam::step() {
  double sq = 0.0;
  for (auto& p : params_) {
    for (double g : p.var.grad().values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  const double lr = current_lr();
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& var = params_[i].var;
    const Tensor& grad = var.grad();
    if (grad.empty()) continue;
    Tensor& w = var.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = grad[j] * clip;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
  }
  return norm;
}

}  // namespace flamed::nn
