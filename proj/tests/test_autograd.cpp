// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "flamed/autograd.hpp"
#include "flamed/errors.hpp"
#include "flamed/nn.hpp"
#include "flamed/optim.hpp"
#include "support/gradcheck.hpp"

namespace flamed {
namespace {

using ag::Var;

Var param(std::size_t r, std::size_t c, Rng& rng) { return ag::parameter(Tensor::randn(r, c, rng)); }

// Squared sum against a fixed random projection keeps every output entry in play.
Var reduce(const Var& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  return ag::sum_all(ag::mul(x, ag::constant(Tensor::randn(x.rows(), x.cols(), rng))));
}

struct OpCase {
  const char* name;
  std::function<Var(const std::vector<Var>&)> fn;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  Rng rng(11);
  std::vector<Var> inputs;
  nn::ParamList params;
  for (std::size_t i = 0; i < c.shapes.size(); ++i) {
    inputs.push_back(param(c.shapes[i].first, c.shapes[i].second, rng));
    params.push_back({"in" + std::to_string(i), inputs.back()});
  }
  auto report = testing::check_gradients([&] { return reduce(c.fn(inputs)); }, params, 1e-5, 64);
  EXPECT_LT(report.max_rel_error, 1e-6) << c.name << " worst " << report.worst;
}

const std::vector<std::size_t> kIds{2, 0, 2, 1, 3};
const std::vector<std::size_t> kTargets{1, 0, 3, 3};

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"add", [](auto& v) { return ag::add(v[0], v[1]); }, {{3, 4}, {3, 4}}},
        OpCase{"sub", [](auto& v) { return ag::sub(v[0], v[1]); }, {{3, 4}, {3, 4}}},
        OpCase{"mul", [](auto& v) { return ag::mul(v[0], v[1]); }, {{3, 4}, {3, 4}}},
        OpCase{"scale", [](auto& v) { return ag::add_scalar(ag::scale(v[0], -1.7), 0.3); }, {{2, 5}}},
        OpCase{"add_row", [](auto& v) { return ag::add_row(v[0], v[1]); }, {{4, 3}, {1, 3}}},
        OpCase{"mul_row", [](auto& v) { return ag::mul_row(v[0], v[1]); }, {{4, 3}, {1, 3}}},
        OpCase{"matmul", [](auto& v) { return ag::matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
        OpCase{"matmul_nt", [](auto& v) { return ag::matmul_nt(v[0], v[1]); }, {{3, 4}, {5, 4}}},
        OpCase{"affine", [](auto& v) { return ag::affine(v[0], v[1], v[2]); }, {{3, 4}, {4, 2}, {1, 2}}},
        OpCase{"gelu", [](auto& v) { return ag::gelu(v[0]); }, {{3, 4}}},
        OpCase{"silu", [](auto& v) { return ag::silu(v[0]); }, {{3, 4}}},
        OpCase{"layer_norm", [](auto& v) { return ag::layer_norm(v[0]); }, {{3, 6}}},
        OpCase{"softmax", [](auto& v) { return ag::softmax_rows(v[0]); }, {{3, 5}}},
        OpCase{"depthwise", [](auto& v) { return ag::depthwise_conv1d(v[0], v[1], v[2]); },
               {{6, 3}, {5, 3}, {1, 3}}},
        OpCase{"unfold", [](auto& v) { return ag::unfold_rows(v[0], 3); }, {{5, 2}}},
        OpCase{"gather", [](auto& v) { return ag::gather_rows(v[0], kIds); }, {{4, 3}}},
        OpCase{"concat_rows", [](auto& v) { return ag::concat_rows({v[0], v[1]}); }, {{2, 3}, {4, 3}}},
        OpCase{"slice_rows", [](auto& v) { return ag::slice_rows(v[0], 1, 2); }, {{4, 3}}},
        OpCase{"concat_cols", [](auto& v) { return ag::concat_cols({v[0], v[1]}); }, {{3, 2}, {3, 4}}},
        OpCase{"slice_cols", [](auto& v) { return ag::slice_cols(v[0], 1, 2); }, {{3, 4}}},
        OpCase{"mse", [](auto& v) { return ag::mse(v[0], v[1]); }, {{3, 4}, {3, 4}}},
        OpCase{"cross_entropy", [](auto& v) { return ag::cross_entropy(v[0], kTargets); }, {{4, 5}}}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Autograd, SharedSubexpressionAccumulates) {
  Rng rng(3);
  Var x = param(2, 2, rng);
  nn::ParamList params{{"x", x}};
  auto report = testing::check_gradients(
      [&] {
        Var y = ag::gelu(x);
        return ag::sum_all(ag::mul(y, ag::add(y, x)));
      },
      params, 1e-5, 16);
  EXPECT_LT(report.max_rel_error, 1e-6) << report.worst;
}

TEST(Autograd, NoGradBuildsNoGraph) {
  Rng rng(3);
  Var x = param(2, 2, rng);
  ag::NoGradGuard guard;
  Var y = ag::gelu(ag::matmul(x, x));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->parents.empty());
}

TEST(Autograd, ShapeMismatchIsContractError) {
  Var a = ag::constant(Tensor(2, 3));
  Var b = ag::constant(Tensor(3, 2));
  EXPECT_THROW(ag::add(a, b), ContractError);
  EXPECT_THROW(ag::matmul(a, a), ContractError);
  EXPECT_THROW(ag::mse(a, b), ContractError);
}

TEST(Autograd, CrossEntropyRejectsOutOfVocabularyTargets) {
  Var logits = ag::constant(Tensor(2, 3));
  const std::vector<std::size_t> bad{0, 3};
  EXPECT_THROW(ag::cross_entropy(logits, bad), DataError);
}

TEST(Autograd, CrossEntropyOfUniformLogitsIsLogVocab) {
  Var logits = ag::constant(Tensor(4, 7, 0.25));
  const std::vector<std::size_t> t{0, 1, 2, 6};
  EXPECT_NEAR(ag::cross_entropy(logits, t).item(), std::log(7.0), 1e-14);
}

TEST(Autograd, DepthwiseConvIsLocal) {
  Rng rng(5);
  Var w = param(5, 2, rng), b = param(1, 2, rng);
  Tensor x = Tensor::randn(12, 2, rng);
  Tensor base = ag::depthwise_conv1d(ag::constant(x), w, b).value();
  x(6, 1) += 1.0;
  Tensor moved = ag::depthwise_conv1d(ag::constant(x), w, b).value();
  for (std::size_t t = 0; t < 12; ++t) {
    const bool changed = std::abs(moved(t, 1) - base(t, 1)) > 0.0;
    EXPECT_EQ(changed, t >= 4 && t <= 8) << "frame " << t;
    EXPECT_EQ(moved(t, 0), base(t, 0));
  }
}

TEST(Positions, DyadicTableHasPeriodFourFeatures) {
  Tensor pe = nn::dyadic_positions(16, 8);
  for (std::size_t p = 0; p + 4 < 16; ++p) {
    EXPECT_NEAR(pe(p, 2), pe(p + 4, 2), 1e-12);
    EXPECT_NEAR(pe(p, 3), pe(p + 4, 3), 1e-12);
  }
}

TEST(Adam, WarmupThenCosineDecay) {
  Rng rng(1);
  nn::ParamList params{{"w", ag::parameter(Tensor::randn(2, 2, rng))}};
  nn::AdamConfig cfg;
  cfg.lr = 1.0;
  cfg.warmup_steps = 4;
  cfg.decay_steps = 12;
  cfg.min_lr_ratio = 0.2;
  nn::Adam opt(params, cfg);
  std::vector<double> lrs;
  for (int s = 0; s < 16; ++s) {
    opt.set_steps_taken(s);
    lrs.push_back(opt.current_lr());
  }
  EXPECT_DOUBLE_EQ(lrs[0], 0.25);
  EXPECT_DOUBLE_EQ(lrs[3], 1.0);
  EXPECT_DOUBLE_EQ(lrs[4], 1.0);
  EXPECT_NEAR(lrs[8], 0.6, 1e-12);
  for (int s = 12; s < 16; ++s) EXPECT_NEAR(lrs[s], 0.2, 1e-12);
  for (int s = 5; s < 12; ++s) EXPECT_LT(lrs[s], lrs[s - 1]);
}

}  // namespace
}  // namespace flamed
