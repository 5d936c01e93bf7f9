// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Vector-field estimator: a DiT-style stack whose token mixer is a depthwise
// 1-D convolution (or, for the baseline variant, multi-head self-attention),
// modulated per block by shift/scale/gate vectors computed from the time and
// speaker embeddings.

#include <cstdint>
#include <string>
#include <vector>

#include "flamed/cfm.hpp"
#include "flamed/nn.hpp"

namespace flamed::denoise {

using ag::Var;

enum class Variant { kAttentionFree, kAttention };

std::string to_string(Variant v);
/// Accepts "attention_free" or "attention_baseline"; throws ConfigError otherwise.
Variant variant_from_string(const std::string& s);

struct DenoiserConfig {
  std::size_t n_blocks = 6;
  std::size_t dim = 256;
  std::size_t kernel = 7;
  std::size_t expansion = 4;
  std::size_t d_spk = 8;
  std::size_t time_dim = 64;
  std::size_t heads = 4;  // attention variant only
  Variant variant = Variant::kAttentionFree;

  void validate() const;
  /// Frames on each side that can influence one output frame.
  std::size_t receptive_radius() const { return n_blocks * (kernel / 2); }
};

class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(std::size_t latent_dim, const DenoiserConfig& cfg, Rng& rng);

  /// x_t is L x D', speaker 1 x d_spk. Throws NumericError naming the first
  /// block whose input or output is non-finite.
  Var operator()(const Var& x_t, double t, const Tensor& speaker) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;

  const DenoiserConfig& config() const { return cfg_; }
  std::size_t latent_dim() const { return latent_dim_; }

 private:
  struct Block {
    nn::DepthwiseConv1d conv;
    nn::MultiHeadAttention attention;
    nn::Linear modulation;  // cond -> [shift | scale | gate], zero-initialised
    nn::Linear expand, project;
  };

  DenoiserConfig cfg_;
  std::size_t latent_dim_ = 0;
  nn::Linear input_;
  nn::TimeEmbedding time_;
  nn::Linear speaker_;
  std::vector<Block> blocks_;
  nn::Linear final_modulation_;  // cond -> [shift | scale], zero-initialised
  nn::Linear head_;              // zero-initialised
};

/// Closed-form parameter count for a configuration.
std::size_t analytic_parameter_count(std::size_t latent_dim, const DenoiserConfig& cfg);

struct DenoiserLosses {
  Var cfm;
  Var anchor;
};

/// Draws t and the prior noise, builds x_t on the enriched-prior path and
/// returns both flow losses. x_pr may carry gradient (from the code folder).
DenoiserLosses denoiser_losses(const Denoiser& model, const Var& x_pr, const Tensor& x1, const Tensor& speaker,
                               const cfm::FlowConfig& flow, Rng& rng);

/// Same with caller-supplied t and noise.
DenoiserLosses denoiser_losses(const Denoiser& model, const Var& x_pr, const Tensor& x1, const Tensor& speaker,
                               const cfm::FlowConfig& flow, double t, const Tensor& noise);

struct SampleResult {
  Tensor latent;
  int nfe = 0;  // counted vector-field evaluations
};

/// x0' = x_pr + tau_infer * eps, integrated with flow.nfe Euler steps.
SampleResult denoiser_sample(const Denoiser& model, const Tensor& x_pr, const Tensor& speaker,
                             const cfm::FlowConfig& flow, Rng& rng);

}  // namespace flamed::denoise
