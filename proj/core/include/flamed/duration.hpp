// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Flow-matching duration and silence generators over log frame counts, and
// the sample-then-expand step that turns per-phoneme counts into a frame
// alignment with silences inserted after each phoneme.

#include <cstdint>
#include <utility>
#include <vector>

#include "flamed/nn.hpp"
#include "flamed/rng.hpp"

namespace flamed::dur {

using ag::Var;

struct GeneratorConfig {
  std::size_t hidden = 128;
  std::size_t blocks = 4;
  std::size_t kernel = 3;
  std::size_t expansion = 2;
  std::size_t time_dim = 32;
  /// Floor on frame counts before taking logs; zero counts map to log(eps).
  double eps_frames = 0.25;
  int nfe = 16;

  void validate() const;
};

/// Encoder output for one phoneme sequence whose first id is [SIL].
struct EncodedPhonemes {
  std::vector<std::int32_t> ids;
  Var hidden;  // L_ph x D

  std::size_t size() const { return ids.size(); }
  /// Throws ContractError unless ids[0] is [SIL] and hidden has one row per id.
  void check() const;
};

struct ExpandedAlignment {
  Var expanded_hidden;                   // L_frames x D
  std::vector<std::int32_t> durations;   // per phoneme, [0] == 0
  std::vector<std::int32_t> silences;    // per phoneme
  std::vector<std::int32_t> frame_phoneme;  // phoneme index each frame belongs to
  std::vector<std::uint8_t> frame_silent;   // 1 for inserted silence frames

  std::size_t frames() const { return frame_phoneme.size(); }
  /// Token id per frame: the phoneme's id, or [SIL] on silence frames.
  std::vector<std::int32_t> frame_tokens(const std::vector<std::int32_t>& ids) const;
};

/// Per-phoneme velocity network: [x_t | hidden] -> Linear -> +time -> blocks -> 1.
class FlowGenerator {
 public:
  FlowGenerator() = default;
  FlowGenerator(std::size_t cond_dim, const GeneratorConfig& cfg, Rng& rng);

  /// x_t is L x 1, hidden is L x D. Returns L x 1.
  Var operator()(const Var& x_t, const Var& hidden, double t) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  nn::Linear input_;
  nn::TimeEmbedding time_;
  std::vector<nn::ConvNeXtBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear head_;
};

/// Duration and silence generators with independent parameters.
struct DurationSilence {
  DurationSilence() = default;
  DurationSilence(std::size_t cond_dim, const GeneratorConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamList& out) const;

  GeneratorConfig config;
  FlowGenerator duration;
  FlowGenerator silence;
};

/// log(max(count, eps)) as an L x 1 tensor.
Tensor log_targets(const std::vector<std::int32_t>& counts, double eps);

/// Flow-matching losses on the straight path d_t = t d1 + (1 - t) d0 for
/// both generators. t and the two noise draws come from rng.
std::pair<Var, Var> dur_sil_training_loss(const DurationSilence& model, const EncodedPhonemes& phon,
                                          const Tensor& d1_log, const Tensor& s1_log, Rng& rng);

/// Same losses with caller-supplied t and noise.
std::pair<Var, Var> dur_sil_training_loss(const DurationSilence& model, const EncodedPhonemes& phon,
                                          const Tensor& d1_log, const Tensor& s1_log, double t,
                                          const Tensor& d0, const Tensor& s0);

/// Frame counts from sampled logs: durations[0] = 0,
/// durations[i] = max(round(exp(d_i)), 1), silences[i] = round(exp(s_i)),
/// rounding half away from zero.
std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> counts_from_logs(const Tensor& d_log,
                                                                                 const Tensor& s_log);

/// Repeats hidden row i durations[i] times, then the [SIL] row (row 0)
/// silences[i] times, for every phoneme in order.
ExpandedAlignment expand(const EncodedPhonemes& phon, std::vector<std::int32_t> durations,
                         std::vector<std::int32_t> silences);

struct SampledTiming {
  Tensor d_log;  // L x 1
  Tensor s_log;  // L x 1
  ExpandedAlignment alignment;
};

/// Integrates both generators from N(0, I) with nfe Euler steps, then expands.
SampledTiming sample_and_expand(const DurationSilence& model, const EncodedPhonemes& phon, int nfe, Rng& rng);

struct StochasticityReport {
  std::vector<double> duration_std;  // per phoneme position
  std::vector<double> silence_std;
  std::vector<double> mean_log_duration;
  std::vector<double> log_duration_std;  // spread of the continuous samples
};

/// Repeats sample_and_expand n_runs times. Run r uses Rng(seed + r), or
/// Rng(seed) for every run when fixed_seed is set.
StochasticityReport duration_stochasticity_probe(const DurationSilence& model, const EncodedPhonemes& phon,
                                                 int n_runs, int nfe, std::uint64_t seed,
                                                 bool fixed_seed = false);

}  // namespace flamed::dur
