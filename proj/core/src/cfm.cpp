// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/cfm.hpp"

#include <cmath>
#include <string>

#include "flamed/errors.hpp"

namespace flamed::cfm {

namespace {

void require_unit_interval(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError(std::string(what) + ": t=" + std::to_string(t) + " outside [0,1]");
  }
}

}  // namespace

void FlowConfig::validate() const {
  if (!(sigma_min >= 0.0 && sigma_min < 1.0)) {
    throw ConfigError("flow.sigma_min must lie in [0,1), got " + std::to_string(sigma_min));
  }
  if (!(tau_train >= 0.0)) throw ConfigError("flow.tau_train must be >= 0");
  if (!(tau_infer >= 0.0)) throw ConfigError("flow.tau_infer must be >= 0");
  if (nfe < 1) throw ConfigError("flow.nfe must be >= 1, got " + std::to_string(nfe));
}

Tensor ot_path(const Tensor& x0, const Tensor& x1, double t, double sigma_min) {
  require_same_shape(x0, x1, "ot_path");
  require_unit_interval(t, "ot_path");
  const double c0 = 1.0 - (1.0 - sigma_min) * t;
  Tensor out(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t * x1[i] + c0 * x0[i];
  return out;
}

Tensor ot_velocity(const Tensor& x0, const Tensor& x1, double sigma_min) {
  require_same_shape(x0, x1, "ot_velocity");
  Tensor out(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - (1.0 - sigma_min) * x0[i];
  return out;
}

Tensor enriched_prior(const Tensor& x_pr, double tau, const Tensor& noise) {
  if (!(tau >= 0.0)) throw DomainError("enriched_prior: tau must be >= 0, got " + std::to_string(tau));
  require_same_shape(x_pr, noise, "enriched_prior");
  Tensor out = x_pr;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tau * noise[i];
  return out;
}

FlowSample draw_flow_sample(const Tensor& x_pr, const Tensor& x1, double tau, double sigma_min,
                            Rng& rng) {
  require_same_shape(x_pr, x1, "draw_flow_sample");
  const Tensor noise = Tensor::randn(x_pr.rows(), x_pr.cols(), rng);
  FlowSample s;
  s.t = rng.uniform();
  s.x0_prime = enriched_prior(x_pr, tau, noise);
  s.x1 = x1;
  s.xt = ot_path(s.x0_prime, x1, s.t, sigma_min);
  s.ut = ot_velocity(s.x0_prime, x1, sigma_min);
  return s;
}

double cfm_loss(const Tensor& v_pred, const Tensor& x1, const Tensor& x0_prime) {
  require_same_shape(v_pred, x1, "cfm_loss");
  require_same_shape(x1, x0_prime, "cfm_loss");
  if (v_pred.empty()) throw ContractError("cfm_loss: empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = v_pred[i] - (x1[i] - x0_prime[i]);
    s += d * d;
  }
  return s / static_cast<double>(v_pred.size());
}

ag::Var cfm_loss(const ag::Var& v_pred, const Tensor& x1, const Tensor& x0_prime) {
  require_same_shape(v_pred.value(), x1, "cfm_loss");
  require_same_shape(x1, x0_prime, "cfm_loss");
  return ag::mse(v_pred, ag::constant(x1 - x0_prime));
}

double anchor_loss(const Tensor& v_pred, const Tensor& xt, const Tensor& x1, double t) {
  require_unit_interval(t, "anchor_loss");
  require_same_shape(v_pred, xt, "anchor_loss");
  require_same_shape(xt, x1, "anchor_loss");
  if (v_pred.empty()) throw ContractError("anchor_loss: empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = xt[i] + (1.0 - t) * v_pred[i] - x1[i];
    s += d * d;
  }
  return s / static_cast<double>(v_pred.size());
}

ag::Var anchor_loss(const ag::Var& v_pred, const Tensor& xt, const Tensor& x1, double t) {
  require_unit_interval(t, "anchor_loss");
  require_same_shape(v_pred.value(), xt, "anchor_loss");
  require_same_shape(xt, x1, "anchor_loss");
  // x~1 - x1 = (1-t) v + (xt - x1)
  ag::Var endpoint = ag::add(ag::scale(v_pred, 1.0 - t), ag::constant(xt));
  return ag::mse(endpoint, ag::constant(x1));
}

EulerResult euler_sample(const VectorField& field, Tensor x0_prime, int nfe) {
  if (nfe < 1) throw DomainError("euler_sample: nfe must be >= 1, got " + std::to_string(nfe));
  EulerResult out{std::move(x0_prime), 0};
  const double dt = 1.0 / static_cast<double>(nfe);
  for (int step = 0; step < nfe; ++step) {
    const double t = static_cast<double>(step) * dt;
    Tensor v = field(out.x1, t);
    ++out.evaluations;
    if (!v.same_shape(out.x1)) {
      throw ContractError("euler_sample: field returned " + v.shape_str() + " for state " +
                          out.x1.shape_str());
    }
    for (std::size_t i = 0; i < v.size(); ++i) out.x1[i] += dt * v[i];
  }
  return out;
}

}  // namespace flamed::cfm
