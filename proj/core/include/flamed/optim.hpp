// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "flamed/nn.hpp"

namespace flamed::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t warmup_steps = 1000;
  std::int64_t decay_steps = 0;  // cosine decay ends here; 0 keeps lr flat
  double min_lr_ratio = 0.1;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

/// Adam with linear warmup, optional cosine decay and global-norm gradient
/// clipping.
class Adam {
 public:
  Adam(ParamList params, AdamConfig cfg);

  void zero_grad();
  /// Applies one update from the accumulated gradients; returns the
  /// pre-clip global gradient norm.
  double step();

  double current_lr() const;
  std::int64_t steps_taken() const { return step_; }

  const ParamList& params() const { return params_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps_taken(std::int64_t s) { step_ = s; }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace flamed::nn
