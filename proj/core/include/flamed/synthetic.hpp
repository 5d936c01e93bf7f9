// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// A fully specified toy codec and dataset generator. Every training target
// (codes, latents, durations, silences) is drawn from known distributions,
// so model behaviour can be checked against the generating process.
//
// Latent layout: d_lat coordinates are split into seven contiguous blocks of
// width d_lat/7 (the speaker block takes the remainder). Level j's embedding
// table is non-zero only in block j and the speaker offset only in the last
// block, so per-level residual decoding is exact nearest-tuple decoding.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "flamed/code_grid.hpp"
#include "flamed/rng.hpp"
#include "flamed/tensor.hpp"

namespace flamed::task {

/// Phoneme id of the silent phoneme [SIL]; real phonemes are 1..n_phonemes.
inline constexpr std::int32_t kSilId = 0;
/// Acoustic codes repeat with this period in frames.
inline constexpr std::size_t kAcousticPeriod = 4;

struct TaskSpec {
  std::int32_t n_phonemes = 16;
  std::int32_t n_speakers = 8;
  std::int32_t codebook_size = 16;
  std::int32_t n_levels = 6;
  std::int32_t d_lat = 42;
  std::int32_t d_spk = 8;
  double frame_hop_s = 0.0125;
  std::uint64_t seed = 1234;

  std::int32_t min_phonemes = 8;
  std::int32_t max_phonemes = 32;
  double dur_log_mean_lo = 0.9;  // per-phoneme mu_p ~ U[lo, hi]
  double dur_log_mean_hi = 1.6;
  double dur_log_std = 0.3;
  double silence_prob = 0.2;     // P(silence > 0) after each phoneme
  double sil_log_mean = 1.3863;  // ln 4
  double sil_log_std = 0.4;
  double latent_noise_std = 0.01;

  void validate() const;
  /// Reserved code marking silent frames at every level.
  std::int32_t silence_code() const { return codebook_size - 1; }
  std::size_t block_width() const { return static_cast<std::size_t>(d_lat) / 7; }

  bool operator==(const TaskSpec&) const = default;
};

/// Frozen generating tables of the toy codec.
struct Codec {
  TaskSpec spec;
  std::array<Tensor, kCodeLevels> embeddings;  // each V x d_lat, float32-exact
  Tensor speaker_emb;                          // n_speakers x d_spk
  Tensor speaker_proj;                         // d_spk x d_lat
  std::vector<double> phoneme_log_mean;        // indexed by phoneme id; [0] unused
  std::vector<std::int32_t> prosody;           // (phoneme id, speaker) -> code
  std::vector<std::int32_t> content_a;         // phoneme id -> level-2 code
  std::vector<std::int32_t> content_b;         // phoneme id -> level-3 code
  std::vector<std::int32_t> acoustic;          // (speaker, frame mod 4, level 4..6) -> code

  static Codec create(const TaskSpec& spec);

  std::int32_t prosody_code(std::int32_t phoneme, std::int32_t speaker) const;
  std::int32_t acoustic_code(std::int32_t speaker, std::size_t frame, std::size_t level) const;
  /// Code tuple of a voiced frame (level order 1..6).
  std::array<std::int32_t, kCodeLevels> frame_codes(std::int32_t phoneme, std::int32_t speaker,
                                                    std::size_t frame) const;
  std::array<std::int32_t, kCodeLevels> silence_codes() const;

  Tensor speaker_offset(std::int32_t speaker) const;  // 1 x d_lat
  Tensor speaker_embedding(std::int32_t speaker) const;  // 1 x d_spk
  /// Sum of level embeddings per frame plus the speaker offset, plus
  /// N(0, noise_std^2) when rng is given and noise_std > 0.
  Tensor codes_to_latent(const CodeGrid& codes, std::int32_t speaker, double noise_std,
                         Rng* rng) const;

  bool operator==(const Codec&) const = default;
};

struct Utterance {
  std::vector<std::int32_t> phonemes;  // leading [SIL]
  std::int32_t speaker_id = 0;
  Tensor speaker_emb;                     // 1 x d_spk
  std::vector<std::int32_t> durations;    // per phoneme, [0] == 0
  std::vector<std::int32_t> silences;     // per phoneme, >= 0
  CodeGrid codes;                          // 6 x L
  Tensor latent;                           // L x d_lat

  std::size_t frames() const { return codes.frames(); }
  bool operator==(const Utterance&) const = default;
};

struct Dataset {
  TaskSpec spec;
  Codec codec;
  std::vector<Utterance> utterances;

  bool operator==(const Dataset&) const = default;
};

/// Builds codes and latent for a given phoneme/speaker/timing layout.
Utterance make_utterance(const Codec& codec, std::vector<std::int32_t> phonemes,
                         std::int32_t speaker, std::vector<std::int32_t> durations,
                         std::vector<std::int32_t> silences, double noise_std, Rng* rng);

/// Samples a phoneme sequence (with leading [SIL]) and ground-truth timing.
struct TimedText {
  std::vector<std::int32_t> phonemes;
  std::vector<std::int32_t> durations;
  std::vector<std::int32_t> silences;
};
TimedText sample_timed_text(const Codec& codec, Rng& rng);

/// Deterministic in spec.seed.
Dataset generate_dataset(const TaskSpec& spec, std::size_t n_utterances);

/// Greedy residual nearest-code search, level 1 to 6. Ties go to the lower code.
CodeGrid codec_decode(const Tensor& latent, const Codec& codec);

/// float64 -> float32 -> float64, the precision every stored tensor carries.
void round_to_float32(Tensor& t);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Frame-level feature dump standing in for a waveform.
struct FrameFeatures {
  double hop_s = 0.0;
  Tensor frames;  // L x d_lat

  double duration_s() const { return static_cast<double>(frames.rows()) * hop_s; }
};

FrameFeatures render_frames(const Tensor& latent, const TaskSpec& spec);
void write_frame_features(const FrameFeatures& ff, const std::filesystem::path& path);
FrameFeatures read_frame_features(const std::filesystem::path& path);

}  // namespace flamed::task
