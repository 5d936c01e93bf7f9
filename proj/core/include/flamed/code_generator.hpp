// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Phoneme encoder, the six-stage hierarchical code decoder and the code
// folder that compresses a code grid into the flow's latent space.

#include <array>
#include <cstdint>
#include <vector>

#include "flamed/code_grid.hpp"
#include "flamed/duration.hpp"
#include "flamed/nn.hpp"

namespace flamed::codes {

using ag::Var;

struct CodeGenConfig {
  std::size_t dim = 256;
  std::size_t heads = 2;
  std::size_t ffn_dim = 512;
  std::size_t ffn_kernel = 3;
  std::size_t encoder_blocks = 4;
  std::size_t stage1_blocks = 4;
  std::size_t stage_blocks = 2;  // stages 2..6
  std::size_t fold_dim = 32;     // per-level embedding width inside the folder
  std::size_t fold_hidden = 128;
  std::size_t fold_kernel = 3;

  void validate() const;
};

struct PromptBundle {
  CodeGrid codes;      // 6 x L_p; L_p == 0 selects the null prompt
  Tensor speaker_emb;  // 1 x d_spk
};

class PhonemeEncoder {
 public:
  PhonemeEncoder() = default;
  PhonemeEncoder(std::size_t vocab, const CodeGenConfig& cfg, Rng& rng);

  /// Throws DataError on an id outside [0, vocab) and ContractError when the
  /// sequence is empty or does not start with [SIL].
  dur::EncodedPhonemes operator()(const std::vector<std::int32_t>& ids) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
  std::size_t vocab() const { return embedding_.vocab(); }

 private:
  nn::Embedding embedding_;
  std::vector<nn::FFTBlock> blocks_;
  nn::LayerNorm norm_;
};

struct DecoderOutput {
  std::array<Var, kCodeLevels> logits;  // each L x V
  bool null_prompt = false;
};

class CodeDecoder {
 public:
  CodeDecoder() = default;
  CodeDecoder(std::size_t vocab, std::size_t d_spk, const CodeGenConfig& cfg, Rng& rng);

  /// With `teacher`, stage j > 1 conditions on the ground-truth codes of level
  /// j-1; without it, on the argmax of stage j-1's logits.
  DecoderOutput forward(const Var& expanded, const PromptBundle& prompt, const CodeGrid* teacher) const;
  /// Staged greedy decoding.
  CodeGrid decode(const Var& expanded, const PromptBundle& prompt) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;
  std::size_t vocab() const { return vocab_; }

 private:
  struct Stage {
    std::vector<nn::FFTBlock> blocks;
    nn::LayerNorm norm;
    nn::Linear head;
  };
  Var run_stage(std::size_t level, const Var& target_input, const Var& speaker, const PromptBundle& prompt,
                Var* logits) const;

  std::size_t vocab_ = 0;
  std::size_t dim_ = 0;
  std::array<nn::Embedding, kCodeLevels> code_embeddings_;  // shared by prompt and target codes
  Var null_prompt_;                                          // 1 x dim
  nn::Linear speaker_proj_;
  std::vector<Stage> stages_;
};

/// Sum over levels of the mean per-frame negative log-likelihood.
Var prior_loss(const std::array<Var, kCodeLevels>& logits, const CodeGrid& target);

/// Per-frame, per-level argmax; ties go to the lowest index.
CodeGrid greedy_decode(const std::array<Tensor, kCodeLevels>& logits);
CodeGrid greedy_decode(const std::array<Var, kCodeLevels>& logits);

/// Per-level embeddings, concatenated per frame to 6*fold_dim, then
/// conv k -> GELU -> conv k down to the latent width.
class CodeFolder {
 public:
  CodeFolder() = default;
  CodeFolder(std::size_t vocab, std::size_t latent_dim, const CodeGenConfig& cfg, Rng& rng);

  Var operator()(const CodeGrid& grid) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
  /// Frames on each side that can influence one output frame.
  std::size_t receptive_radius() const { return 2 * (kernel_ / 2); }

 private:
  std::size_t vocab_ = 0;
  std::size_t kernel_ = 1;
  std::array<nn::Embedding, kCodeLevels> embeddings_;
  nn::Conv1d conv1_, conv2_;
};

}  // namespace flamed::codes
