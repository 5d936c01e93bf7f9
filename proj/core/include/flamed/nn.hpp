// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flamed/autograd.hpp"
#include "flamed/rng.hpp"

namespace flamed::nn {

using ag::Var;

struct NamedParam {
  std::string name;
  Var var;
};
using ParamList = std::vector<NamedParam>;

std::size_t count_parameters(const ParamList& params);

struct Linear {
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool zero_init = false);
  Var operator()(const Var& x) const { return ag::affine(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;

  Var weight;  // in x out
  Var bias;    // 1 x out
};

/// Full 1-D convolution along time, evaluated as unfold + matmul.
struct Conv1d {
  Conv1d() = default;
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  std::size_t kernel = 1;
  Var weight;  // (kernel*in) x out
  Var bias;
};

struct DepthwiseConv1d {
  DepthwiseConv1d() = default;
  DepthwiseConv1d(std::size_t channels, std::size_t kernel, Rng& rng);
  Var operator()(const Var& x) const { return ag::depthwise_conv1d(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;

  Var weight;  // kernel x channels
  Var bias;
};

/// Layer normalization with learned gain and offset.
struct LayerNorm {
  LayerNorm() = default;
  explicit LayerNorm(std::size_t channels);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  Var gain;
  Var offset;
};

struct Embedding {
  Embedding() = default;
  Embedding(std::size_t vocab, std::size_t dim, Rng& rng, double stddev = 1.0);
  Var operator()(std::span<const std::size_t> ids) const { return ag::gather_rows(table, ids); }
  void collect(const std::string& prefix, ParamList& out) const;
  std::size_t vocab() const { return table.rows(); }

  Var table;
};

struct MultiHeadAttention {
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t dim, std::size_t heads, Rng& rng);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  std::size_t heads = 1;
  Linear query, key, value, output;
};

/// Sinusoidal features of a scalar time followed by a two-layer projection.
struct TimeEmbedding {
  TimeEmbedding() = default;
  TimeEmbedding(std::size_t feature_dim, std::size_t out_dim, Rng& rng);
  Var operator()(double t) const;
  void collect(const std::string& prefix, ParamList& out) const;

  std::size_t feature_dim = 0;
  Linear fc1, fc2;
};

/// Depthwise conv -> layer norm -> pointwise expansion -> GELU -> pointwise
/// projection, with a residual connection.
struct ConvNeXtBlock {
  ConvNeXtBlock() = default;
  ConvNeXtBlock(std::size_t dim, std::size_t kernel, std::size_t expansion, Rng& rng);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  DepthwiseConv1d mixer;
  LayerNorm norm;
  Linear expand, project;
};

/// Pre-norm feed-forward transformer block: self-attention, then a
/// convolutional feed-forward (conv k -> ReLU -> pointwise).
struct FFTBlock {
  FFTBlock() = default;
  FFTBlock(std::size_t dim, std::size_t heads, std::size_t ffn_dim, std::size_t kernel, Rng& rng);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  LayerNorm norm1, norm2;
  MultiHeadAttention attention;
  Conv1d ffn_in;
  Linear ffn_out;
};

/// [cos, sin] features of 1000*t over geometric frequencies, as 1 x dim.
Tensor sinusoidal_time_features(double t, std::size_t dim);

/// Positional table L x dim with periods 2, 4, 8, ... frames, so short
/// periodic structure (e.g. position mod 4) is linearly readable.
Tensor dyadic_positions(std::size_t length, std::size_t dim);

}  // namespace flamed::nn
