// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Evaluation harnesses: temporal statistics of alignments, a deterministic
// duration baseline, NFE/tau sweeps, code accuracies, the prior-sufficiency
// ablation and the sequence-length complexity probe. Report writers for CSV,
// JSON lines and SVG plots live at the bottom.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flamed/pipeline.hpp"

namespace flamed::eval {

using ag::Var;

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
};
MeanStd mean_std(const std::vector<double>& v);

struct TemporalReport {
  std::size_t utterances = 0;
  MeanStd speech_rate;  // syllables per second
  MeanStd mphd;         // mean voiced phoneme duration, seconds
  MeanStd n_pauses;     // maximal runs of silent frames
  MeanStd mpad;         // mean pause duration, seconds, over utterances that have pauses
  bool no_pauses = false;  // no silent frame anywhere; mpad is then reported as 0
};

/// Syllables per utterance are its phonemes other than [SIL]. Throws
/// DataError when an alignment is empty or inconsistent with its counts.
TemporalReport temporal_metrics(const std::vector<pipeline::Alignment>& alignments,
                                const std::vector<std::size_t>& syllables, double hop_s);
TemporalReport temporal_metrics(const std::vector<pipeline::SynthesisResult>& results, double hop_s);

/// Per-utterance pause statistics used by temporal_metrics.
struct PauseStats {
  std::size_t count = 0;
  double mean_frames = 0.0;
};
PauseStats pause_stats(const std::vector<std::uint8_t>& frame_silent);

/// MSE-regression duration/silence predictor on the frozen encoder output:
/// Linear -> GELU -> Linear -> [log duration | log silence]. No sampling, so
/// repeated predictions are identical.
class DurationBaseline {
 public:
  DurationBaseline() = default;
  DurationBaseline(std::size_t cond_dim, std::size_t hidden, Rng& rng);

  Var operator()(const Var& hidden) const;  // L x 2
  void collect(const std::string& prefix, nn::ParamList& out) const;
  /// Counts with the same rounding and floors as the flow generators.
  std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> predict(const dur::EncodedPhonemes& phon) const;

 private:
  nn::Linear in_, out_;
};

struct BaselineTrainConfig {
  std::size_t hidden = 64;
  std::int64_t steps = 500;
  std::size_t batch_size = 16;
  double lr = 3e-3;
  std::uint64_t seed = 1;
};

/// Fits the baseline on the training split with the model's encoder frozen.
/// Returns the final-step mean loss.
double train_duration_baseline(DurationBaseline& baseline, const pipeline::Model& model, const task::Dataset& ds,
                               const BaselineTrainConfig& cfg);

/// Several syntheses of one text.
struct RunSet {
  std::vector<std::int32_t> phonemes;
  std::vector<pipeline::Alignment> runs;
};

struct DiversityRecord {
  // Means over texts of the per-text statistic.
  double prob_duration_std = 0.0;  // mean over positions of the std of durations
  double det_duration_std = 0.0;
  double prob_pauses_std = 0.0;
  double det_pauses_std = 0.0;
  double prob_max_position_std = 0.0;
  double det_max_position_std = 0.0;
  double duration_std_ratio = 0.0;  // prob / det, +inf when det is 0 and prob > 0
  double pauses_std_ratio = 0.0;
  bool duration_baseline_degenerate = false;
  bool pauses_baseline_degenerate = false;
};

/// Both sets must hold the same texts in the same order (DataError otherwise).
DiversityRecord diversity_compare(const std::vector<RunSet>& probabilistic, const std::vector<RunSet>& deterministic);

enum class SweepAxis { kNfe, kTau };
std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepPoint {
  double value = 0.0;
  double mse = 0.0;           // latent reconstruction error against ground truth
  double code_accuracy = 0.0; // frames whose six decoded codes all match
  double wall_seconds = 0.0;  // whole synthesis, summed over the eval set
  double sample_seconds = 0.0;
  double rtf = 0.0;
  int nfe = 0;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::kNfe;
  std::vector<SweepPoint> points;  // ascending value
};

/// Evaluation utterances with their prompts.
struct EvalItem {
  std::size_t index = 0;  // into the dataset
  codes::PromptBundle prompt;
  std::int32_t prompt_speaker = 0;
};

/// Held-out items: dataset utterances [n_train, n_train + n_eval), each with
/// a prompt from a training utterance. When cross_speaker is set the prompt
/// comes from a different speaker than the target text's original.
std::vector<EvalItem> make_eval_items(const pipeline::Model& model, const task::Dataset& ds, std::size_t n_eval,
                                      bool cross_speaker, std::uint64_t seed);

/// `runs` full syntheses of one evaluation item's text; run r draws from
/// Rng(mix_seed(seed, r)). With `baseline` set, durations and silences come
/// from its deterministic prediction instead of the flow generators.
RunSet resynthesize(const pipeline::Model& model, const task::Dataset& ds, const EvalItem& item,
                    std::size_t runs, const DurationBaseline* baseline, std::uint64_t seed);

/// Synthesizes every item once per value with ground-truth timing forced, so
/// latents align frame by frame. Item i uses Rng(mix_seed(seed, i)) at every
/// value (paired noise).
SweepReport sweep(const pipeline::Model& model, const task::Dataset& ds, const std::vector<EvalItem>& items,
                  SweepAxis axis, std::vector<double> values, const cfm::FlowConfig& base, std::uint64_t seed);

struct AccuracyReport {
  std::array<double, kCodeLevels> teacher_forced{};  // per level, decoder with teacher codes
  double content_teacher_forced = 0.0;               // levels 2 and 3 pooled
  double pipeline_frame = 0.0;  // full chain, all six decoded codes match ground truth
  double pipeline_code = 0.0;   // full chain, per code
  double speaker_follow = 0.0;  // acoustic levels of cross-speaker syntheses follow the prompt speaker
  std::size_t frames = 0;
};

/// Teacher-forced decoder accuracy on `same` (prompts from the target's
/// speaker), full-chain accuracy with forced ground-truth timing on `same`,
/// and prompt-speaker following of levels 4-6 on `cross`.
AccuracyReport accuracy_report(const pipeline::Model& model, const task::Dataset& ds,
                               const std::vector<EvalItem>& same, const std::vector<EvalItem>& cross,
                               const cfm::FlowConfig& flow, std::uint64_t seed);

struct PriorSufficiencyConfig {
  std::int64_t steps = 1500;
  std::size_t batch_size = 8;
  std::size_t n_eval = 32;
  std::uint64_t seed = 1;
};

struct PriorSufficiencyReport {
  double attention_free_mse = 0.0;
  double attention_mse = 0.0;
  double zero_prior_mse = 0.0;
  double relative_gap = 0.0;      // |free - attention| / attention
  double zero_prior_ratio = 0.0;  // zero_prior / free
};

/// Trains folder + denoiser from scratch three ways on ground-truth codes
/// (attention-free with the folded prior, attention baseline with the folded
/// prior, attention-free from a zero prior) and compares held-out
/// reconstruction MSE with ground-truth codes folded at inference.
PriorSufficiencyReport prior_sufficiency(const TrainConfig& cfg, const task::Dataset& ds,
                                         const PriorSufficiencyConfig& pc);

struct TimingOptions {
  int warmup = 3;
  int reps = 20;
  double min_sample_seconds = 2e-3;  // below this, calls are batched per sample
};

/// Median seconds per call of fn, batching calls when one is too fast to time.
double median_seconds(const std::function<void()>& fn, const TimingOptions& opts = {});

struct ComplexityPoint {
  std::size_t length = 0;
  double attention_free_seconds = 0.0;
  double attention_seconds = 0.0;
};

struct ComplexityReport {
  std::vector<ComplexityPoint> points;
  double attention_free_slope = 0.0;
  double attention_slope = 0.0;
  /// Smallest measured L where attention is slower, or the crossing of the
  /// two fitted power laws when no measured point crosses.
  std::optional<double> crossover_length;
  bool crossover_measured = false;
  std::size_t d_probe_length = 0;
  double mixer_d_slope = 0.0;         // depthwise conv op alone, d -> 2d -> 4d
  double forward_d_slope = 0.0;       // whole attention-free forward, for reference
};

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

ComplexityReport complexity_probe(const std::vector<std::size_t>& lengths, const denoise::DenoiserConfig& base,
                                  std::size_t latent_dim, const TimingOptions& opts, std::uint64_t seed);

// Report writers. Sweep wall-clock fields only appear in timing_json and
// sweep_timing_csv, so the other sweep outputs are reproducible bit for bit.
nlohmann::json to_json(const TemporalReport& r);
nlohmann::json to_json(const DiversityRecord& r);
nlohmann::json to_json(const SweepReport& r);
nlohmann::json timing_json(const SweepReport& r);
nlohmann::json to_json(const AccuracyReport& r);
nlohmann::json to_json(const PriorSufficiencyReport& r);
nlohmann::json to_json(const ComplexityReport& r);

std::string sweep_csv(const SweepReport& r);
std::string sweep_timing_csv(const SweepReport& r);
std::string complexity_csv(const ComplexityReport& r);

struct Series {
  std::string label;
  std::vector<double> x, y;
};
/// Minimal line chart. Log axes take log10 of the data; non-positive values
/// are dropped from log plots.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool log_x, bool log_y);

}  // namespace flamed::eval
