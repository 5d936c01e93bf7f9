// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Joint model, total loss, training loop with checkpoints, and the full
// synthesis chain: phonemes + prompt -> timing -> codes -> prior -> latent.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flamed/code_generator.hpp"
#include "flamed/config.hpp"
#include "flamed/denoiser.hpp"
#include "flamed/duration.hpp"
#include "flamed/optim.hpp"
#include "flamed/synthetic.hpp"

namespace flamed::pipeline {

using ag::Var;

struct Model {
  Model() = default;
  explicit Model(const TrainConfig& cfg);

  nn::ParamList parameters() const;

  TrainConfig config;
  codes::PhonemeEncoder encoder;
  dur::DurationSilence timing;
  codes::CodeDecoder decoder;
  codes::CodeFolder folder;
  denoise::Denoiser denoiser;
};

/// Prompt cut from another utterance of the same speaker (or from `source`
/// itself when it is the speaker's only utterance): a random contiguous
/// segment of at most max_frames frames, plus that utterance's speaker embedding.
codes::PromptBundle make_prompt(const task::Utterance& source, std::size_t max_frames, Rng& rng);

/// Picks a prompt utterance index for `target`: another utterance by the
/// same speaker when one exists.
std::size_t pick_prompt_utterance(const task::Dataset& ds, std::size_t target, Rng& rng);

/// The first min(cfg.n_utterances, size) utterances train; the rest are held out.
std::size_t train_count(const TrainConfig& cfg, const task::Dataset& ds);

struct LossBreakdown {
  double prior = 0.0;
  double duration = 0.0;
  double silence = 0.0;
  double cfm = 0.0;
  double anchor = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  Var total;
  LossBreakdown terms;
};

/// Weighted sum of the five training losses for one utterance, all teacher
/// forced. Throws NumericError naming the first non-finite term.
TotalLoss total_loss(const Model& model, const task::Utterance& utt, const codes::PromptBundle& prompt, Rng& rng);

struct StepLog {
  std::int64_t step = 0;
  LossBreakdown loss;
  double grad_norm = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const StepLog&)> on_step;  // called every step
};

struct TrainResult {
  std::vector<StepLog> log;
  std::filesystem::path last_checkpoint;
};

/// Minibatch training of every parameter under the total loss. The batch
/// for step s depends only on (cfg.seed, s), so resumed runs see the same data.
TrainResult train(Model& model, const task::Dataset& ds, const TrainOptions& opts = {});

// Checkpoint container: magic, version, config echo, step, named float32
// tensors, then (optionally) the optimizer moments.
void save_checkpoint(const std::filesystem::path& path, const Model& model, std::int64_t step,
                     const nn::Adam* optimizer);
struct CheckpointInfo {
  TrainConfig config;
  std::int64_t step = 0;
  bool has_optimizer = false;
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> tensors;  // name, (rows, cols)
};
/// Reads the header and tensor table without touching any model.
CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);
/// Loads weights (and optimizer moments when `optimizer` is given) into a
/// model built from the same config. Name or shape mismatches are ConfigError.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, Model& model, nn::Adam* optimizer = nullptr);

struct Alignment {
  std::vector<std::int32_t> durations;
  std::vector<std::int32_t> silences;
  std::vector<std::int32_t> frame_phoneme;
  std::vector<std::uint8_t> frame_silent;

  std::size_t frames() const { return frame_phoneme.size(); }
  static Alignment from(const dur::ExpandedAlignment& a);
  /// Layout implied by per-phoneme counts.
  static Alignment from_counts(const std::vector<std::int32_t>& durations, const std::vector<std::int32_t>& silences);
};

struct SynthesisOptions {
  cfm::FlowConfig flow;
  int duration_nfe = 16;
  // When set, sampling of durations and silences is skipped.
  std::optional<std::vector<std::int32_t>> forced_durations;
  std::optional<std::vector<std::int32_t>> forced_silences;
};

struct SynthesisResult {
  std::vector<std::int32_t> phonemes;
  CodeGrid predicted_codes;  // code decoder output
  CodeGrid codes;            // decoded from the denoised latent
  Tensor prior;              // folded predicted codes
  Tensor latent;
  Alignment alignment;
  double wall_seconds = 0.0;
  double sample_seconds = 0.0;  // wall time inside the flow sampler alone
  int nfe = 0;  // counted denoiser evaluations
  double generated_seconds = 0.0;
  double rtf = 0.0;
};

SynthesisResult synthesize(const Model& model, const task::Codec& codec, const std::vector<std::int32_t>& phonemes,
                           const codes::PromptBundle& prompt, const SynthesisOptions& opts, Rng& rng);

/// Frame-feature file plus a one-record JSONL sidecar (codes, alignment, nfe,
/// generated seconds). Wall-clock fields go to a separate timing record so the
/// first two files are reproducible bit for bit.
void write_synthesis(const SynthesisResult& r, const task::TaskSpec& spec, const std::filesystem::path& frames_path,
                     const std::filesystem::path& sidecar_path, const std::filesystem::path& timing_path);

}  // namespace flamed::pipeline
