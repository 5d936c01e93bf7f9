// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/code_generator.hpp"

#include <cmath>
#include <string>

#include "flamed/errors.hpp"
#include "flamed/synthetic.hpp"

namespace flamed::codes {

namespace {

std::vector<std::size_t> level_ids(const CodeGrid& grid, std::size_t level, std::size_t vocab, const char* what) {
  std::vector<std::size_t> ids = grid.level(level);
  for (std::size_t f = 0; f < ids.size(); ++f) {
    const auto code = static_cast<std::int32_t>(grid.at(level, f));
    if (code < 0 || static_cast<std::size_t>(code) >= vocab) {
      throw DataError(std::string(what) + ": code " + std::to_string(code) + " at level " +
                      std::to_string(level + 1) + ", frame " + std::to_string(f) + " outside [0, " +
                      std::to_string(vocab) + ")");
    }
  }
  return ids;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[r] = best;
  }
  return out;
}

}  // namespace

void CodeGenConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) throw ConfigError("codegen.dim must be a positive multiple of heads");
  if (dim % 2 != 0) throw ConfigError("codegen.dim must be even for positional features");
  if (ffn_dim == 0) throw ConfigError("codegen.ffn_dim must be positive");
  if (ffn_kernel % 2 == 0) throw ConfigError("codegen.ffn_kernel must be odd");
  if (encoder_blocks == 0 || stage1_blocks == 0 || stage_blocks == 0) {
    throw ConfigError("codegen block counts must be positive");
  }
  if (fold_dim == 0 || fold_hidden == 0) throw ConfigError("codegen.fold sizes must be positive");
  if (fold_kernel % 2 == 0) throw ConfigError("codegen.fold_kernel must be odd");
}

PhonemeEncoder::PhonemeEncoder(std::size_t vocab, const CodeGenConfig& cfg, Rng& rng)
    : embedding_(vocab, cfg.dim, rng), norm_(cfg.dim) {
  cfg.validate();
  for (std::size_t b = 0; b < cfg.encoder_blocks; ++b) {
    blocks_.emplace_back(cfg.dim, cfg.heads, cfg.ffn_dim, cfg.ffn_kernel, rng);
  }
}

dur::EncodedPhonemes PhonemeEncoder::operator()(const std::vector<std::int32_t>& ids) const {
  if (ids.empty()) throw ContractError("phoneme encoder: empty phoneme sequence");
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab()) {
      throw DataError("phoneme encoder: id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                      " outside vocabulary of " + std::to_string(vocab()));
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  if (ids.front() != task::kSilId) throw ContractError("phoneme encoder: sequence must start with [SIL]");
  const std::size_t dim = embedding_.table.cols();
  Var h = ag::add(embedding_(rows), ag::constant(nn::dyadic_positions(ids.size(), dim)));
  for (const auto& block : blocks_) h = block(h);
  dur::EncodedPhonemes out{ids, norm_(h)};
  return out;
}

void PhonemeEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
  embedding_.collect(prefix + ".embedding", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].collect(prefix + ".block" + std::to_string(b), out);
  norm_.collect(prefix + ".norm", out);
}

CodeDecoder::CodeDecoder(std::size_t vocab, std::size_t d_spk, const CodeGenConfig& cfg, Rng& rng)
    : vocab_(vocab), dim_(cfg.dim), speaker_proj_(d_spk, cfg.dim, rng) {
  cfg.validate();
  for (auto& e : code_embeddings_) e = nn::Embedding(vocab, cfg.dim, rng);
  null_prompt_ = ag::parameter(Tensor::randn(1, cfg.dim, rng));
  for (std::size_t j = 0; j < kCodeLevels; ++j) {
    Stage s;
    const std::size_t n = j == 0 ? cfg.stage1_blocks : cfg.stage_blocks;
    for (std::size_t b = 0; b < n; ++b) s.blocks.emplace_back(cfg.dim, cfg.heads, cfg.ffn_dim, cfg.ffn_kernel, rng);
    s.norm = nn::LayerNorm(cfg.dim);
    s.head = nn::Linear(cfg.dim, vocab, rng);
    stages_.push_back(std::move(s));
  }
}

Var CodeDecoder::run_stage(std::size_t level, const Var& target_input, const Var& speaker,
                           const PromptBundle& prompt, Var* logits) const {
  const std::size_t len = target_input.rows();
  Var prompt_part = prompt.codes.frames() == 0
                        ? null_prompt_
                        : code_embeddings_[level](level_ids(prompt.codes, level, vocab_, "prompt codes"));
  const std::size_t lp = prompt_part.rows();
  // Positions restart at the prompt/target boundary.
  Tensor pe(lp + len, dim_);
  const Tensor pe_prompt = nn::dyadic_positions(lp, dim_), pe_target = nn::dyadic_positions(len, dim_);
  std::copy(pe_prompt.values().begin(), pe_prompt.values().end(), pe.values().begin());
  std::copy(pe_target.values().begin(), pe_target.values().end(),
            pe.values().begin() + static_cast<std::ptrdiff_t>(lp * dim_));
  Var x = ag::add_row(ag::add(ag::concat_rows({prompt_part, target_input}), ag::constant(std::move(pe))), speaker);
  const Stage& st = stages_[level];
  for (const auto& block : st.blocks) x = block(x);
  Var hidden = ag::slice_rows(x, lp, len);
  *logits = st.head(st.norm(hidden));
  return hidden;
}

DecoderOutput CodeDecoder::forward(const Var& expanded, const PromptBundle& prompt, const CodeGrid* teacher) const {
  if (!expanded || expanded.rows() == 0) throw ContractError("code decoder: empty expanded sequence");
  if (expanded.cols() != dim_) {
    throw ConfigError("code decoder: expanded width " + std::to_string(expanded.cols()) + " != model width " +
                      std::to_string(dim_));
  }
  if (prompt.speaker_emb.rows() != 1 || prompt.speaker_emb.cols() != speaker_proj_.weight.rows()) {
    throw ConfigError("code decoder: speaker embedding is " + prompt.speaker_emb.shape_str() + ", expected 1x" +
                      std::to_string(speaker_proj_.weight.rows()));
  }
  if (teacher && teacher->frames() != expanded.rows()) {
    throw ContractError("code decoder: teacher codes have " + std::to_string(teacher->frames()) + " frames, expected " +
                        std::to_string(expanded.rows()));
  }
  DecoderOutput out;
  out.null_prompt = prompt.codes.frames() == 0;
  const Var speaker = speaker_proj_(ag::constant(prompt.speaker_emb));
  Var input = expanded;
  for (std::size_t j = 0; j < kCodeLevels; ++j) {
    Var hidden = run_stage(j, input, speaker, prompt, &out.logits[j]);
    if (j + 1 == kCodeLevels) break;
    const std::vector<std::size_t> prev = teacher ? level_ids(*teacher, j, vocab_, "teacher codes")
                                                  : argmax_rows(out.logits[j].value());
    input = ag::add(hidden, code_embeddings_[j](prev));
  }
  return out;
}

CodeGrid CodeDecoder::decode(const Var& expanded, const PromptBundle& prompt) const {
  ag::NoGradGuard no_grad;
  return greedy_decode(forward(expanded, prompt, nullptr).logits);
}

void CodeDecoder::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t j = 0; j < kCodeLevels; ++j) {
    code_embeddings_[j].collect(prefix + ".code_embedding" + std::to_string(j + 1), out);
  }
  out.push_back({prefix + ".null_prompt", null_prompt_});
  speaker_proj_.collect(prefix + ".speaker_proj", out);
  for (std::size_t j = 0; j < stages_.size(); ++j) {
    const std::string sp = prefix + ".stage" + std::to_string(j + 1);
    for (std::size_t b = 0; b < stages_[j].blocks.size(); ++b) {
      stages_[j].blocks[b].collect(sp + ".block" + std::to_string(b), out);
    }
    stages_[j].norm.collect(sp + ".norm", out);
    stages_[j].head.collect(sp + ".head", out);
  }
}

Var prior_loss(const std::array<Var, kCodeLevels>& logits, const CodeGrid& target) {
  Var total;
  for (std::size_t j = 0; j < kCodeLevels; ++j) {
    if (logits[j].rows() != target.frames()) {
      throw ContractError("prior_loss: level " + std::to_string(j + 1) + " logits have " +
                          std::to_string(logits[j].rows()) + " rows, target has " + std::to_string(target.frames()));
    }
    std::vector<std::size_t> ids = target.level(j);
    for (std::size_t f = 0; f < ids.size(); ++f) {
      if (target.at(j, f) < 0) throw DataError("prior_loss: negative target code at level " + std::to_string(j + 1));
    }
    Var nll = ag::cross_entropy(logits[j], ids);
    total = j == 0 ? nll : ag::add(total, nll);
  }
  return total;
}

CodeGrid greedy_decode(const std::array<Tensor, kCodeLevels>& logits) {
  const std::size_t len = logits[0].rows();
  CodeGrid grid(len);
  for (std::size_t j = 0; j < kCodeLevels; ++j) {
    if (logits[j].rows() != len) throw ContractError("greedy_decode: levels disagree on frame count");
    const auto ids = argmax_rows(logits[j]);
    for (std::size_t f = 0; f < len; ++f) grid.at(j, f) = static_cast<std::int32_t>(ids[f]);
  }
  return grid;
}

CodeGrid greedy_decode(const std::array<Var, kCodeLevels>& logits) {
  std::array<Tensor, kCodeLevels> values;
  for (std::size_t j = 0; j < kCodeLevels; ++j) values[j] = logits[j].value();
  return greedy_decode(values);
}

CodeFolder::CodeFolder(std::size_t vocab, std::size_t latent_dim, const CodeGenConfig& cfg, Rng& rng)
    : vocab_(vocab),
      kernel_(cfg.fold_kernel),
      conv1_(kCodeLevels * cfg.fold_dim, cfg.fold_hidden, cfg.fold_kernel, rng),
      conv2_(cfg.fold_hidden, latent_dim, cfg.fold_kernel, rng) {
  for (auto& e : embeddings_) e = nn::Embedding(vocab, cfg.fold_dim, rng);
}

Var CodeFolder::operator()(const CodeGrid& grid) const {
  if (grid.frames() == 0) throw ContractError("fold_codes: empty code grid");
  std::vector<Var> parts;
  parts.reserve(kCodeLevels);
  for (std::size_t j = 0; j < kCodeLevels; ++j) parts.push_back(embeddings_[j](level_ids(grid, j, vocab_, "fold_codes")));
  return conv2_(ag::gelu(conv1_(ag::concat_cols(parts))));
}

void CodeFolder::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t j = 0; j < kCodeLevels; ++j) embeddings_[j].collect(prefix + ".embedding" + std::to_string(j + 1), out);
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
}

}  // namespace flamed::codes
