// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/nn.hpp"

#include <cmath>
#include <numbers>

#include "flamed/errors.hpp"

namespace flamed::nn {

namespace {

Var init_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  return ag::parameter(Tensor::randn(rows, cols, rng, stddev));
}

}  // namespace

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool zero_init)
    : weight(zero_init ? ag::parameter(Tensor(in, out))
                       : init_normal(in, out, rng, 1.0 / std::sqrt(static_cast<double>(in)))),
      bias(ag::parameter(Tensor(1, out))) {}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Conv1d::Conv1d(std::size_t in, std::size_t out, std::size_t k, Rng& rng)
    : kernel(k),
      weight(init_normal(k * in, out, rng, 1.0 / std::sqrt(static_cast<double>(k * in)))),
      bias(ag::parameter(Tensor(1, out))) {
  if (k % 2 == 0) throw ConfigError("Conv1d: kernel size must be odd, got " + std::to_string(k));
}

Var Conv1d::operator()(const Var& x) const {
  if (kernel == 1) return ag::affine(x, weight, bias);
  return ag::affine(ag::unfold_rows(x, kernel), weight, bias);
}

void Conv1d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

DepthwiseConv1d::DepthwiseConv1d(std::size_t channels, std::size_t k, Rng& rng)
    : weight(init_normal(k, channels, rng, 1.0 / std::sqrt(static_cast<double>(k)))),
      bias(ag::parameter(Tensor(1, channels))) {
  if (k % 2 == 0) throw ConfigError("DepthwiseConv1d: kernel size must be odd");
}

void DepthwiseConv1d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t channels)
    : gain(ag::parameter(Tensor(1, channels, 1.0))), offset(ag::parameter(Tensor(1, channels))) {}

Var LayerNorm::operator()(const Var& x) const {
  return ag::add_row(ag::mul_row(ag::layer_norm(x), gain), offset);
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".offset", offset});
}

Embedding::Embedding(std::size_t vocab, std::size_t dim, Rng& rng, double stddev)
    : table(init_normal(vocab, dim, rng, stddev)) {}

void Embedding::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".table", table});
}

MultiHeadAttention::MultiHeadAttention(std::size_t dim, std::size_t h, Rng& rng)
    : heads(h), query(dim, dim, rng), key(dim, dim, rng), value(dim, dim, rng), output(dim, dim, rng) {
  if (h == 0 || dim % h != 0) {
    throw ConfigError("MultiHeadAttention: dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(h) + " heads");
  }
}

Var MultiHeadAttention::operator()(const Var& x) const {
  const std::size_t dim = x.cols();
  const std::size_t head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var q = query(x), k = key(x), v = value(x);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : ag::slice_cols(q, h * head_dim, head_dim);
    Var kh = heads == 1 ? k : ag::slice_cols(k, h * head_dim, head_dim);
    Var vh = heads == 1 ? v : ag::slice_cols(v, h * head_dim, head_dim);
    Var attn = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt));
    outs.push_back(ag::matmul(attn, vh));
  }
  return output(heads == 1 ? outs.front() : ag::concat_cols(outs));
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

TimeEmbedding::TimeEmbedding(std::size_t fdim, std::size_t out_dim, Rng& rng)
    : feature_dim(fdim), fc1(fdim, out_dim, rng), fc2(out_dim, out_dim, rng) {}

Var TimeEmbedding::operator()(double t) const {
  return fc2(ag::silu(fc1(ag::constant(sinusoidal_time_features(t, feature_dim)))));
}

void TimeEmbedding::collect(const std::string& prefix, ParamList& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

ConvNeXtBlock::ConvNeXtBlock(std::size_t dim, std::size_t kernel, std::size_t expansion, Rng& rng)
    : mixer(dim, kernel, rng), norm(dim), expand(dim, expansion * dim, rng), project(expansion * dim, dim, rng) {}

Var ConvNeXtBlock::operator()(const Var& x) const {
  return ag::add(x, project(ag::gelu(expand(norm(mixer(x))))));
}

void ConvNeXtBlock::collect(const std::string& prefix, ParamList& out) const {
  mixer.collect(prefix + ".mixer", out);
  norm.collect(prefix + ".norm", out);
  expand.collect(prefix + ".expand", out);
  project.collect(prefix + ".project", out);
}

FFTBlock::FFTBlock(std::size_t dim, std::size_t heads, std::size_t ffn_dim, std::size_t kernel, Rng& rng)
    : norm1(dim), norm2(dim), attention(dim, heads, rng), ffn_in(dim, ffn_dim, kernel, rng), ffn_out(ffn_dim, dim, rng) {}

Var FFTBlock::operator()(const Var& x) const {
  Var h = ag::add(x, attention(norm1(x)));
  return ag::add(h, ffn_out(ag::relu(ffn_in(norm2(h)))));
}

void FFTBlock::collect(const std::string& prefix, ParamList& out) const {
  norm1.collect(prefix + ".norm1", out);
  norm2.collect(prefix + ".norm2", out);
  attention.collect(prefix + ".attention", out);
  ffn_in.collect(prefix + ".ffn_in", out);
  ffn_out.collect(prefix + ".ffn_out", out);
}

Tensor sinusoidal_time_features(double t, std::size_t dim) {
  const std::size_t half = dim / 2;
  Tensor f(1, dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    const double arg = 1000.0 * t * freq;
    f[i] = std::cos(arg);
    f[half + i] = std::sin(arg);
  }
  return f;
}

Tensor dyadic_positions(std::size_t length, std::size_t dim) {
  Tensor pe(length, dim);
  const std::size_t pairs = dim / 2;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double period = std::ldexp(1.0, static_cast<int>(1 + i % 12));
    const double omega = 2.0 * std::numbers::pi / period;
    for (std::size_t pos = 0; pos < length; ++pos) {
      pe(pos, 2 * i) = std::sin(omega * static_cast<double>(pos));
      pe(pos, 2 * i + 1) = std::cos(omega * static_cast<double>(pos));
    }
  }
  return pe;
}

}  // namespace flamed::nn
