// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/denoiser.hpp"

#include <cmath>

#include "flamed/errors.hpp"

namespace flamed::denoise {

namespace {

void require_finite(const Tensor& x, const std::string& where) {
  if (!x.all_finite()) {
    throw NumericError(where + ": non-finite value at frame " + std::to_string(x.first_nonfinite_row()));
  }
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::kAttention ? "attention_baseline" : "attention_free"; }

Variant variant_from_string(const std::string& s) {
  if (s == "attention_free") return Variant::kAttentionFree;
  if (s == "attention_baseline") return Variant::kAttention;
  throw ConfigError("denoiser.variant: unknown value '" + s + "' (expected attention_free or attention_baseline)");
}

void DenoiserConfig::validate() const {
  if (n_blocks < 1) throw ConfigError("denoiser.n_blocks must be >= 1");
  if (kernel < 3 || kernel % 2 == 0) throw ConfigError("denoiser.kernel must be odd and >= 3");
  if (dim == 0 || expansion == 0) throw ConfigError("denoiser.dim and denoiser.expansion must be positive");
  if (d_spk == 0) throw ConfigError("denoiser.d_spk must be positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw ConfigError("denoiser.time_dim must be even and >= 2");
  if (variant == Variant::kAttention && (heads == 0 || dim % heads != 0)) {
    throw ConfigError("denoiser.heads must divide denoiser.dim");
  }
}

Denoiser::Denoiser(std::size_t latent_dim, const DenoiserConfig& cfg, Rng& rng)
    : cfg_(cfg), latent_dim_(latent_dim) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  input_ = nn::Linear(latent_dim, d, rng);
  time_ = nn::TimeEmbedding(cfg.time_dim, d, rng);
  speaker_ = nn::Linear(cfg.d_spk, d, rng);
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    Block blk;
    if (cfg.variant == Variant::kAttention) {
      blk.attention = nn::MultiHeadAttention(d, cfg.heads, rng);
    } else {
      blk.conv = nn::DepthwiseConv1d(d, cfg.kernel, rng);
    }
    blk.modulation = nn::Linear(d, 3 * d, rng, /*zero_init=*/true);
    blk.expand = nn::Linear(d, cfg.expansion * d, rng);
    blk.project = nn::Linear(cfg.expansion * d, d, rng);
    blocks_.push_back(std::move(blk));
  }
  final_modulation_ = nn::Linear(d, 2 * d, rng, /*zero_init=*/true);
  head_ = nn::Linear(d, latent_dim, rng, /*zero_init=*/true);
}

Var Denoiser::operator()(const Var& x_t, double t, const Tensor& speaker) const {
  if (x_t.cols() != latent_dim_) {
    throw ContractError("denoiser: input width " + std::to_string(x_t.cols()) + " != latent width " +
                        std::to_string(latent_dim_));
  }
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("denoiser: t outside [0, 1]");
  if (speaker.rows() != 1 || speaker.cols() != cfg_.d_spk) {
    throw ConfigError("denoiser: speaker embedding is " + speaker.shape_str() + ", expected 1x" +
                      std::to_string(cfg_.d_spk));
  }
  const std::size_t d = cfg_.dim;
  const Var cond = ag::silu(ag::add(time_(t), speaker_(ag::constant(speaker))));
  Var x = input_(x_t);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    require_finite(x.value(), "denoiser block " + std::to_string(b) + " input");
    const Block& blk = blocks_[b];
    const Var mod = blk.modulation(cond);
    const Var shift = ag::slice_cols(mod, 0, d);
    const Var scale = ag::add_scalar(ag::slice_cols(mod, d, d), 1.0);
    const Var gate = ag::slice_cols(mod, 2 * d, d);
    Var y = cfg_.variant == Variant::kAttention ? blk.attention(x) : blk.conv(x);
    y = ag::add_row(ag::mul_row(ag::layer_norm(y), scale), shift);
    y = blk.project(ag::gelu(blk.expand(y)));
    x = ag::add(x, ag::mul_row(y, gate));
  }
  require_finite(x.value(), "denoiser block " + std::to_string(blocks_.size() - 1) + " output");
  const Var fmod = final_modulation_(cond);
  Var h = ag::add_row(ag::mul_row(ag::layer_norm(x), ag::add_scalar(ag::slice_cols(fmod, d, d), 1.0)),
                      ag::slice_cols(fmod, 0, d));
  return head_(h);
}

void Denoiser::collect(const std::string& prefix, nn::ParamList& out) const {
  input_.collect(prefix + ".input", out);
  time_.collect(prefix + ".time", out);
  speaker_.collect(prefix + ".speaker", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    const Block& blk = blocks_[b];
    if (cfg_.variant == Variant::kAttention) {
      blk.attention.collect(bp + ".attention", out);
    } else {
      blk.conv.collect(bp + ".conv", out);
    }
    blk.modulation.collect(bp + ".modulation", out);
    blk.expand.collect(bp + ".expand", out);
    blk.project.collect(bp + ".project", out);
  }
  final_modulation_.collect(prefix + ".final_modulation", out);
  head_.collect(prefix + ".head", out);
}

std::size_t analytic_parameter_count(std::size_t latent_dim, const DenoiserConfig& cfg) {
  const std::size_t d = cfg.dim, e = cfg.expansion * cfg.dim;
  std::size_t n = latent_dim * d + d;                 // input projection
  n += cfg.time_dim * d + d + d * d + d;              // time embedding MLP
  n += cfg.d_spk * d + d;                             // speaker projection
  const std::size_t mixer = cfg.variant == Variant::kAttention ? 4 * (d * d + d) : cfg.kernel * d + d;
  const std::size_t block = mixer + (d * 3 * d + 3 * d) + (d * e + e) + (e * d + d);
  n += cfg.n_blocks * block;
  n += d * 2 * d + 2 * d;                             // final modulation
  n += d * latent_dim + latent_dim;                   // head
  return n;
}

DenoiserLosses denoiser_losses(const Denoiser& model, const Var& x_pr, const Tensor& x1, const Tensor& speaker,
                               const cfm::FlowConfig& flow, double t, const Tensor& noise) {
  require_same_shape(x_pr.value(), x1, "denoiser_losses: x_pr vs x1");
  require_same_shape(noise, x1, "denoiser_losses: noise vs x1");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("denoiser_losses: t outside [0, 1]");
  const Var x0p = ag::add(x_pr, ag::constant(noise * flow.tau_train));
  const Var x1v = ag::constant(x1);
  const Var xt = ag::add(ag::constant(x1 * t), ag::scale(x0p, 1.0 - (1.0 - flow.sigma_min) * t));
  const Var v = model(xt, t, speaker);
  DenoiserLosses out;
  out.cfm = ag::mse(v, ag::sub(x1v, x0p));
  out.anchor = ag::mse(ag::add(xt, ag::scale(v, 1.0 - t)), x1v);
  if (!std::isfinite(out.cfm.item()) || !std::isfinite(out.anchor.item())) {
    throw NumericError("denoiser_losses: non-finite loss at t=" + std::to_string(t));
  }
  return out;
}

DenoiserLosses denoiser_losses(const Denoiser& model, const Var& x_pr, const Tensor& x1, const Tensor& speaker,
                               const cfm::FlowConfig& flow, Rng& rng) {
  const double t = rng.uniform();
  const Tensor noise = Tensor::randn(x1.rows(), x1.cols(), rng);
  return denoiser_losses(model, x_pr, x1, speaker, flow, t, noise);
}

SampleResult denoiser_sample(const Denoiser& model, const Tensor& x_pr, const Tensor& speaker,
                             const cfm::FlowConfig& flow, Rng& rng) {
  if (flow.nfe < 1) throw DomainError("denoiser_sample: nfe must be >= 1");
  ag::NoGradGuard no_grad;
  const Tensor noise = Tensor::randn(x_pr.rows(), x_pr.cols(), rng);
  Tensor x0p = cfm::enriched_prior(x_pr, flow.tau_infer, noise);
  const cfm::VectorField field = [&](const Tensor& x, double t) {
    return model(ag::constant(x), t, speaker).value();
  };
  cfm::EulerResult r = cfm::euler_sample(field, std::move(x0p), flow.nfe);
  return {std::move(r.x1), r.evaluations};
}

}  // namespace flamed::denoise
