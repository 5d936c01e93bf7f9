// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "flamed/duration.hpp"
#include "flamed/errors.hpp"
#include "support/gradcheck.hpp"

namespace flamed {
namespace {

using dur::EncodedPhonemes;

dur::GeneratorConfig tiny_config() {
  dur::GeneratorConfig c;
  c.hidden = 8;
  c.blocks = 2;
  c.time_dim = 8;
  return c;
}

EncodedPhonemes random_phonemes(std::size_t n, std::size_t dim, Rng& rng) {
  EncodedPhonemes p;
  p.ids.push_back(0);
  for (std::size_t i = 1; i < n; ++i) p.ids.push_back(static_cast<std::int32_t>(1 + rng.uniform_int(5)));
  p.hidden = ag::constant(Tensor::randn(n, dim, rng));
  return p;
}

TEST(CountsFromLogs, HandTraceOfSilAB) {
  Rng rng(1);
  EncodedPhonemes phon;
  phon.ids = {0, 1, 2};
  phon.hidden = ag::constant(Tensor::randn(3, 4, rng));
  Tensor d(3, 1), s(3, 1);
  d[0] = 5.0;  // ignored: the leading [SIL] never emits phoneme frames
  d[1] = 0.0;
  d[2] = std::log(2.0);
  s[0] = 0.0;
  s[1] = -10.0;
  s[2] = 0.0;
  auto [durations, silences] = dur::counts_from_logs(d, s);
  EXPECT_EQ(durations, (std::vector<std::int32_t>{0, 1, 2}));
  EXPECT_EQ(silences, (std::vector<std::int32_t>{1, 0, 1}));
  const auto a = dur::expand(phon, durations, silences);
  ASSERT_EQ(a.frames(), 5u);
  EXPECT_EQ(a.frame_tokens(phon.ids), (std::vector<std::int32_t>{0, 1, 2, 2, 0}));
  EXPECT_EQ(a.frame_silent, (std::vector<std::uint8_t>{1, 0, 0, 0, 1}));
  // Silence frames carry the encoded [SIL] row.
  EXPECT_EQ(a.expanded_hidden.value().row(0)[0], phon.hidden.value()(0, 0));
  EXPECT_EQ(a.expanded_hidden.value().row(4)[2], phon.hidden.value()(0, 2));
  EXPECT_EQ(a.expanded_hidden.value().row(3)[1], phon.hidden.value()(2, 1));
}

TEST(CountsFromLogs, RandomSamplesRespectBookkeeping) {
  Rng rng(2);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(12);
    Tensor d = Tensor::randn(n, 1, rng, 1.5), s = Tensor::randn(n, 1, rng, 1.5);
    auto [durations, silences] = dur::counts_from_logs(d, s);
    ASSERT_EQ(durations[0], 0);
    std::int64_t phone_frames = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) ASSERT_GE(durations[i], 1);
      ASSERT_GE(silences[i], 0);
      phone_frames += durations[i];
      total += durations[i] + silences[i];
    }
    EncodedPhonemes phon = random_phonemes(n, 2, rng);
    const auto a = dur::expand(phon, durations, silences);
    ASSERT_EQ(static_cast<std::int64_t>(a.frames()), total);
    std::int64_t voiced = 0;
    for (auto f : a.frame_silent) voiced += f ? 0 : 1;
    ASSERT_EQ(voiced, phone_frames);
  }
}

TEST(CountsFromLogs, VeryNegativeSilencesInsertNothing) {
  Rng rng(3);
  Tensor d = Tensor::randn(9, 1, rng);
  Tensor s(9, 1, -10.0);
  EXPECT_EQ(dur::counts_from_logs(d, s).second, std::vector<std::int32_t>(9, 0));
  Tensor below(9, 1, std::log(0.4));
  EXPECT_EQ(dur::counts_from_logs(d, below).second, std::vector<std::int32_t>(9, 0));
}

TEST(CountsFromLogs, RoundsHalfAwayFromZero) {
  Tensor d(2, 1), s(2, 1);
  d[1] = std::log(2.5000001);
  s[0] = std::log(0.5000001);
  s[1] = std::log(0.4999999);
  auto [durations, silences] = dur::counts_from_logs(d, s);
  EXPECT_EQ(durations[1], 3);
  EXPECT_EQ(silences[0], 1);
  EXPECT_EQ(silences[1], 0);
}

TEST(CountsFromLogs, DivergentSampleIsNumericError) {
  Tensor d(2, 1), s(2, 1);
  d[1] = 50.0;
  EXPECT_THROW(dur::counts_from_logs(d, s), NumericError);
  d[1] = std::nan("");
  EXPECT_THROW(dur::counts_from_logs(d, s), NumericError);
}

TEST(Expand, RemovingSilenceRecoversPhonemeExpansion) {
  Rng rng(4);
  EncodedPhonemes phon = random_phonemes(6, 3, rng);
  const std::vector<std::int32_t> durations{0, 2, 1, 3, 1, 2};
  const auto with_sil = dur::expand(phon, durations, {1, 0, 2, 0, 3, 1});
  const auto without = dur::expand(phon, durations, std::vector<std::int32_t>(6, 0));
  std::vector<std::int32_t> kept;
  const auto tokens = with_sil.frame_tokens(phon.ids);
  for (std::size_t f = 0; f < tokens.size(); ++f)
    if (!with_sil.frame_silent[f]) kept.push_back(with_sil.frame_phoneme[f]);
  EXPECT_EQ(kept, without.frame_phoneme);
}

TEST(Expand, RejectsBrokenLayouts) {
  Rng rng(5);
  EncodedPhonemes phon = random_phonemes(3, 2, rng);
  EXPECT_THROW(dur::expand(phon, {1, 1, 1}, {0, 0, 0}), ContractError);
  EXPECT_THROW(dur::expand(phon, {0, 0, 1}, {0, 0, 0}), ContractError);
  EXPECT_THROW(dur::expand(phon, {0, 1, 1}, {0, -1, 0}), ContractError);
  EXPECT_THROW(dur::expand(phon, {0, 1}, {0, 0}), ContractError);
  phon.ids[0] = 3;
  EXPECT_THROW(dur::expand(phon, {0, 1, 1}, {0, 0, 0}), ContractError);
}

TEST(LogTargets, ZeroCountsUseFloor) {
  const Tensor t = dur::log_targets({0, 1, 4}, 0.25);
  EXPECT_DOUBLE_EQ(t[0], std::log(0.25));
  EXPECT_DOUBLE_EQ(t[1], 0.0);
  EXPECT_DOUBLE_EQ(t[2], std::log(4.0));
  EXPECT_THROW(dur::log_targets({-1}, 0.25), DataError);
}

TEST(GeneratorConfig, FloorMustRoundBackToZero) {
  dur::GeneratorConfig c;
  c.eps_frames = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.eps_frames = 0.25;
  EXPECT_NO_THROW(c.validate());
}

class GeneratorShapes : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GeneratorShapes, OutputMatchesInputAndIsPure) {
  Rng rng(6);
  dur::DurationSilence model(4, tiny_config(), rng);
  EncodedPhonemes phon = random_phonemes(GetParam(), 4, rng);
  const Tensor x = Tensor::randn(GetParam(), 1, rng);
  const Tensor a = model.duration(ag::constant(x), phon.hidden, 0.3).value();
  const Tensor b = model.duration(ag::constant(x), phon.hidden, 0.3).value();
  EXPECT_EQ(a.rows(), GetParam());
  EXPECT_EQ(a.cols(), 1u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(model.silence(ag::constant(x), phon.hidden, 0.3).value().rows(), GetParam());
  EXPECT_THROW(model.duration(ag::constant(Tensor(GetParam() + 1, 1)), phon.hidden, 0.3), ContractError);
}

INSTANTIATE_TEST_SUITE_P(Lengths, GeneratorShapes, ::testing::Values(1u, 7u, 33u));

TEST(DurSilLoss, GradientsMatchCentralDifferences) {
  Rng rng(7);
  dur::DurationSilence model(4, tiny_config(), rng);
  nn::ParamList params;
  model.collect("gen", params);
  EncodedPhonemes phon = random_phonemes(6, 4, rng);
  auto hidden = ag::parameter(phon.hidden.value());
  phon.hidden = hidden;
  params.push_back({"hidden", hidden});
  const Tensor d1 = dur::log_targets({0, 2, 3, 1, 5, 2}, 0.25);
  const Tensor s1 = dur::log_targets({1, 0, 0, 4, 0, 2}, 0.25);
  const Tensor d0 = Tensor::randn(6, 1, rng), s0 = Tensor::randn(6, 1, rng);
  auto report = testing::check_gradients(
      [&] {
        auto [ld, ls] = dur::dur_sil_training_loss(model, phon, d1, s1, 0.37, d0, s0);
        return ag::add(ld, ls);
      },
      params, 1e-5, 4);
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst;
}

TEST(DurSilLoss, MatchesElementwiseRecomputation) {
  Rng rng(8);
  dur::DurationSilence model(4, tiny_config(), rng);
  EncodedPhonemes phon = random_phonemes(5, 4, rng);
  const Tensor d1 = Tensor::randn(5, 1, rng), s1 = Tensor::randn(5, 1, rng);
  const Tensor d0 = Tensor::randn(5, 1, rng), s0 = Tensor::randn(5, 1, rng);
  const double t = 0.61;
  auto [ld, ls] = dur::dur_sil_training_loss(model, phon, d1, s1, t, d0, s0);

  auto oracle = [&](const dur::FlowGenerator& gen, const Tensor& x1, const Tensor& x0) {
    Tensor xt(5, 1);
    for (std::size_t i = 0; i < 5; ++i) xt[i] = t * x1[i] + (1.0 - t) * x0[i];
    const Tensor v = gen(ag::constant(xt), phon.hidden, t).value();
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) sum += std::pow(v[i] - (x1[i] - x0[i]), 2);
    return sum / 5.0;
  };
  EXPECT_NEAR(ld.item(), oracle(model.duration, d1, d0), 1e-12 * std::abs(ld.item()));
  EXPECT_NEAR(ls.item(), oracle(model.silence, s1, s0), 1e-12 * std::abs(ls.item()));
}

TEST(DurSilLoss, ZeroNetworkAtEndpointGivesNoiseEnergy) {
  Rng rng(9);
  dur::DurationSilence model(4, tiny_config(), rng);
  nn::ParamList params;
  model.collect("gen", params);
  for (auto& p : params) {
    if (p.name.find(".head.") != std::string::npos) {
      auto v = p.var;
      v.mutable_value().fill(0.0);
    }
  }
  EncodedPhonemes phon = random_phonemes(7, 4, rng);
  const Tensor zeros(7, 1);
  const Tensor d0 = Tensor::randn(7, 1, rng), s0 = Tensor::randn(7, 1, rng);
  auto [ld, ls] = dur::dur_sil_training_loss(model, phon, zeros, zeros, 1.0, d0, s0);
  EXPECT_NEAR(ld.item(), mean_squared(d0), 1e-14);
  EXPECT_NEAR(ls.item(), mean_squared(s0), 1e-14);
}

TEST(DurSilLoss, NonFiniteTargetIsDataError) {
  Rng rng(10);
  dur::DurationSilence model(4, tiny_config(), rng);
  EncodedPhonemes phon = random_phonemes(3, 4, rng);
  Tensor bad(3, 1);
  bad[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(dur::dur_sil_training_loss(model, phon, bad, Tensor(3, 1), rng), DataError);
}

TEST(SampleAndExpand, InvariantsAndProbe) {
  Rng rng(11);
  dur::DurationSilence model(4, tiny_config(), rng);
  EncodedPhonemes phon = random_phonemes(8, 4, rng);
  for (int r = 0; r < 20; ++r) {
    const auto s = dur::sample_and_expand(model, phon, 4, rng);
    const auto& a = s.alignment;
    EXPECT_EQ(a.durations[0], 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < phon.size(); ++i) {
      if (i > 0) EXPECT_GE(a.durations[i], 1);
      EXPECT_GE(a.silences[i], 0);
      total += static_cast<std::size_t>(a.durations[i] + a.silences[i]);
    }
    EXPECT_EQ(a.frames(), total);
    EXPECT_EQ(a.expanded_hidden.rows(), total);
  }
  const auto fixed = dur::duration_stochasticity_probe(model, phon, 5, 4, 42, /*fixed_seed=*/true);
  for (std::size_t i = 0; i < phon.size(); ++i) {
    EXPECT_EQ(fixed.duration_std[i], 0.0);
    EXPECT_EQ(fixed.silence_std[i], 0.0);
  }
  const auto varied = dur::duration_stochasticity_probe(model, phon, 30, 4, 42);
  EXPECT_GT(*std::max_element(varied.log_duration_std.begin(), varied.log_duration_std.end()), 0.0);
  EXPECT_THROW(dur::duration_stochasticity_probe(model, phon, 1, 4, 42), DomainError);
  EXPECT_THROW(dur::sample_and_expand(model, phon, 0, rng), DomainError);
}

}  // namespace
}  // namespace flamed
