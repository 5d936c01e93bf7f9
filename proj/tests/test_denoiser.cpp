// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "flamed/denoiser.hpp"
#include "flamed/errors.hpp"
#include "support/gradcheck.hpp"

namespace flamed {
namespace {

using ag::Var;
using denoise::DenoiserConfig;
using denoise::Variant;

DenoiserConfig small_config(Variant v = Variant::kAttentionFree) {
  DenoiserConfig c;
  c.n_blocks = 2;
  c.dim = 16;
  c.kernel = 5;
  c.expansion = 2;
  c.d_spk = 3;
  c.time_dim = 8;
  c.heads = 2;
  c.variant = v;
  return c;
}

class DenoiserShapes : public ::testing::TestWithParam<std::tuple<Variant, std::size_t>> {};

TEST_P(DenoiserShapes, OutputIsLByLatent) {
  const auto [variant, len] = GetParam();
  Rng rng(1);
  denoise::Denoiser model(6, small_config(variant), rng);
  nn::ParamList params;
  model.collect("d", params);
  testing::randomize(params, 3);
  const Tensor x = Tensor::randn(len, 6, rng);
  const Tensor v = model(ag::constant(x), 0.4, Tensor::randn(1, 3, rng)).value();
  EXPECT_EQ(v.rows(), len);
  EXPECT_EQ(v.cols(), 6u);
  EXPECT_TRUE(v.all_finite());
}

INSTANTIATE_TEST_SUITE_P(All, DenoiserShapes,
                         ::testing::Combine(::testing::Values(Variant::kAttentionFree, Variant::kAttention),
                                            ::testing::Values(1u, 8u, 512u)));

TEST(Denoiser, ZeroInitialisedHeadGivesZeroVelocity) {
  Rng rng(2);
  denoise::Denoiser model(6, small_config(), rng);
  const Tensor v = model(ag::constant(Tensor::randn(10, 6, rng, 5.0)), 0.8, Tensor::randn(1, 3, rng)).value();
  for (double x : v.values()) EXPECT_EQ(x, 0.0);
}

TEST(Denoiser, PerturbationStaysInsideReceptiveField) {
  Rng rng(3);
  const DenoiserConfig cfg = small_config();
  denoise::Denoiser model(6, cfg, rng);
  nn::ParamList params;
  model.collect("d", params);
  testing::randomize(params, 4);
  const std::size_t r = cfg.receptive_radius();
  ASSERT_EQ(r, 4u);
  const Tensor spk = Tensor::randn(1, 3, rng);
  Tensor x = Tensor::randn(30, 6, rng);
  const Tensor base = model(ag::constant(x), 0.5, spk).value();
  const std::size_t i = 14;
  x(i, 2) += 0.5;
  const Tensor after = model(ag::constant(x), 0.5, spk).value();
  for (std::size_t f = 0; f < 30; ++f) {
    double diff = 0.0;
    for (std::size_t c = 0; c < 6; ++c) diff = std::max(diff, std::abs(after(f, c) - base(f, c)));
    if (f + r >= i && f <= i + r) {
      EXPECT_GT(diff, 0.0) << "frame " << f;
    } else {
      EXPECT_EQ(diff, 0.0) << "frame " << f;
    }
  }
}

TEST(Denoiser, NonFiniteInputNamesBlock) {
  Rng rng(4);
  denoise::Denoiser model(6, small_config(), rng);
  Tensor x = Tensor::randn(5, 6, rng);
  x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    model(ag::constant(x), 0.5, Tensor(1, 3));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("block 0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("frame 3"), std::string::npos) << e.what();
  }
}

TEST(Denoiser, InvalidConfigs) {
  DenoiserConfig c = small_config();
  c.kernel = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.kernel = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.n_blocks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(denoise::variant_from_string("transformer"), ConfigError);
  EXPECT_EQ(denoise::variant_from_string("attention_baseline"), Variant::kAttention);
}

TEST(Denoiser, ParameterCountMatchesFormula) {
  for (Variant v : {Variant::kAttentionFree, Variant::kAttention}) {
    for (std::size_t blocks : {1u, 3u}) {
      DenoiserConfig c = small_config(v);
      c.n_blocks = blocks;
      Rng rng(5);
      denoise::Denoiser model(7, c, rng);
      nn::ParamList params;
      model.collect("d", params);
      EXPECT_EQ(nn::count_parameters(params), denoise::analytic_parameter_count(7, c));
    }
  }
  // One attention-free block, hand expanded: d=16, e=32, k=5, D'=7, time 8, spk 3.
  DenoiserConfig c = small_config();
  c.n_blocks = 1;
  const std::size_t hand = (7 * 16 + 16) + (8 * 16 + 16 + 16 * 16 + 16) + (3 * 16 + 16) +
                           (5 * 16 + 16 + 16 * 48 + 48 + 16 * 32 + 32 + 32 * 16 + 16) + (16 * 32 + 32) +
                           (16 * 7 + 7);
  EXPECT_EQ(denoise::analytic_parameter_count(7, c), hand);
}

TEST(DenoiserLosses, IdentityTaskWithZeroNetworkIsZero) {
  Rng rng(6);
  denoise::Denoiser model(6, small_config(), rng);
  cfm::FlowConfig flow;
  flow.tau_train = 0.0;
  const Tensor x1 = Tensor::randn(9, 6, rng);
  const auto l = denoise::denoiser_losses(model, ag::constant(x1), x1, Tensor(1, 3), flow, 0.3,
                                          Tensor::randn(9, 6, rng));
  EXPECT_NEAR(l.cfm.item(), 0.0, 1e-30);
  // x_t = x1 * (1 - (1 - sigma) t) + t x1 = x1 (1 + sigma t); anchor sees only the sigma term.
  EXPECT_NEAR(l.anchor.item(), 0.0, 1e-8);
}

TEST(DenoiserLosses, MatchElementwiseRecomputation) {
  Rng rng(7);
  denoise::Denoiser model(6, small_config(), rng);
  nn::ParamList params;
  model.collect("d", params);
  testing::randomize(params, 8);
  cfm::FlowConfig flow;
  const Tensor x_pr = Tensor::randn(7, 6, rng), x1 = Tensor::randn(7, 6, rng), noise = Tensor::randn(7, 6, rng);
  const Tensor spk = Tensor::randn(1, 3, rng);
  const double t = 0.42;
  const auto l = denoise::denoiser_losses(model, ag::constant(x_pr), x1, spk, flow, t, noise);

  Tensor x0p(7, 6), xt(7, 6);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    x0p[i] = x_pr[i] + flow.tau_train * noise[i];
    xt[i] = t * x1[i] + (1.0 - (1.0 - flow.sigma_min) * t) * x0p[i];
  }
  const Tensor v = model(ag::constant(xt), t, spk).value();
  double cfm = 0.0, anchor = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    cfm += std::pow(v[i] - (x1[i] - x0p[i]), 2);
    anchor += std::pow(xt[i] + (1.0 - t) * v[i] - x1[i], 2);
  }
  const double n = static_cast<double>(x1.size());
  EXPECT_NEAR(l.cfm.item(), cfm / n, 1e-10);
  EXPECT_NEAR(l.anchor.item(), anchor / n, 1e-10);
}

TEST(DenoiserLosses, GradientsMatchCentralDifferences) {
  for (Variant v : {Variant::kAttentionFree, Variant::kAttention}) {
    Rng rng(9);
    denoise::Denoiser model(5, small_config(v), rng);
    nn::ParamList params;
    model.collect("d", params);
    testing::randomize(params, 10, 0.25);
    Var x_pr = ag::parameter(Tensor::randn(6, 5, rng));
    params.push_back({"x_pr", x_pr});
    const Tensor x1 = Tensor::randn(6, 5, rng), noise = Tensor::randn(6, 5, rng), spk = Tensor::randn(1, 3, rng);
    cfm::FlowConfig flow;
    auto report = testing::check_gradients(
        [&] {
          auto l = denoise::denoiser_losses(model, x_pr, x1, spk, flow, 0.37, noise);
          return ag::add(l.cfm, l.anchor);
        },
        params, 1e-5, 3);
    EXPECT_LT(report.max_rel_error, 1e-4) << denoise::to_string(v) << " " << report.worst;
  }
}

TEST(DenoiserSample, FrozenFlowReturnsPrior) {
  Rng rng(11);
  denoise::Denoiser model(6, small_config(), rng);
  cfm::FlowConfig flow;
  flow.tau_infer = 0.0;
  const Tensor x_pr = Tensor::randn(12, 6, rng);
  for (int nfe : {1, 4, 16}) {
    flow.nfe = nfe;
    Rng r(5);
    const auto out = denoise::denoiser_sample(model, x_pr, Tensor(1, 3), flow, r);
    EXPECT_EQ(out.latent, x_pr);
    EXPECT_EQ(out.nfe, nfe);
  }
}

TEST(DenoiserSample, DeterministicUnderSeed) {
  Rng rng(12);
  denoise::Denoiser model(6, small_config(), rng);
  nn::ParamList params;
  model.collect("d", params);
  testing::randomize(params, 13);
  cfm::FlowConfig flow;
  flow.nfe = 5;
  const Tensor x_pr = Tensor::randn(12, 6, rng), spk = Tensor::randn(1, 3, rng);
  Rng a(77), b(77), c(78);
  const auto ra = denoise::denoiser_sample(model, x_pr, spk, flow, a);
  EXPECT_EQ(ra.latent, denoise::denoiser_sample(model, x_pr, spk, flow, b).latent);
  EXPECT_NE(ra.latent, denoise::denoiser_sample(model, x_pr, spk, flow, c).latent);
  flow.nfe = 0;
  EXPECT_THROW(denoise::denoiser_sample(model, x_pr, spk, flow, a), DomainError);
}

}  // namespace
}  // namespace flamed
