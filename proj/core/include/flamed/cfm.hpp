// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Optimal-transport conditional flow matching primitives shared by the
// denoiser and the duration/silence generators.

#include <functional>

#include "flamed/autograd.hpp"
#include "flamed/rng.hpp"
#include "flamed/tensor.hpp"

namespace flamed::cfm {

struct FlowConfig {
  double sigma_min = 1e-4;
  double tau_train = 1.0;  // prior noise scale while training
  double tau_infer = 0.3;  // prior noise scale while sampling
  int nfe = 16;            // Euler steps

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// One flow-matching training example built from an (enriched) prior point.
struct FlowSample {
  Tensor x0_prime;
  Tensor x1;
  double t = 0.0;
  Tensor xt;
  Tensor ut;  // x1 - (1 - sigma_min) x0'
};

/// x_t = t x1 + (1 - (1 - sigma_min) t) x0.
Tensor ot_path(const Tensor& x0, const Tensor& x1, double t, double sigma_min);

/// u_t = x1 - (1 - sigma_min) x0; independent of t.
Tensor ot_velocity(const Tensor& x0, const Tensor& x1, double sigma_min);

/// x0' = x_pr + tau * noise.
Tensor enriched_prior(const Tensor& x_pr, double tau, const Tensor& noise);

/// Draws noise and t ~ U(0,1) and assembles the full training example.
FlowSample draw_flow_sample(const Tensor& x_pr, const Tensor& x1, double tau, double sigma_min,
                            Rng& rng);

/// Mean squared error between v_pred and (x1 - x0'). No sigma_min factor.
double cfm_loss(const Tensor& v_pred, const Tensor& x1, const Tensor& x0_prime);
ag::Var cfm_loss(const ag::Var& v_pred, const Tensor& x1, const Tensor& x0_prime);

/// Mean squared error between x_t + (1 - t) v_pred and x1.
double anchor_loss(const Tensor& v_pred, const Tensor& xt, const Tensor& x1, double t);
ag::Var anchor_loss(const ag::Var& v_pred, const Tensor& xt, const Tensor& x1, double t);

/// Velocity field with its conditioning already bound: (x, t) -> v.
using VectorField = std::function<Tensor(const Tensor& x, double t)>;

struct EulerResult {
  Tensor x1;
  int evaluations = 0;
};

/// Fixed-step Euler integration from t=0 to t=1 in `nfe` uniform steps.
/// The field is evaluated exactly `nfe` times.
EulerResult euler_sample(const VectorField& field, Tensor x0_prime, int nfe);

}  // namespace flamed::cfm
