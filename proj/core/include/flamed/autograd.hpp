// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal reverse-mode automatic differentiation over 2-D tensors.
//
// Every op builds a node holding its value and, when any input requires a
// gradient and grad mode is on, a closure that pushes the node's gradient
// into its parents. Parameters are long-lived nodes shared across graphs;
// everything else lives only as long as the graph that references it.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flamed/tensor.hpp"

namespace flamed::ag {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Lazily allocates grad with the value's shape.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad();

 private:
  std::shared_ptr<Node> node_;
};

/// Thread-local switch; when off, ops build no graph.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor t);
Var parameter(Tensor t);

/// Runs reverse accumulation from a 1x1 loss, seeding d(loss)/d(loss) = 1.
void backward(const Var& loss);

// Elementwise (identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// Broadcast a 1xC row over every row of an LxC tensor.
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);

/// a (m x k) * b (k x n).
Var matmul(const Var& a, const Var& b);
/// a (m x k) * b^T, b is (n x k).
Var matmul_nt(const Var& a, const Var& b);
/// x * w + bias, bias 1 x n.
Var affine(const Var& x, const Var& w, const Var& bias);

Var gelu(const Var& a);
Var silu(const Var& a);
Var relu(const Var& a);

/// Per-row standardization without affine parameters.
Var layer_norm(const Var& a, double eps = 1e-5);
Var softmax_rows(const Var& a);

/// Depthwise convolution along rows, zero "same" padding. w is k x C, bias 1 x C.
Var depthwise_conv1d(const Var& x, const Var& w, const Var& bias);
/// Gathers a k-frame window around each row: L x C -> L x (k*C), zero padded.
Var unfold_rows(const Var& x, std::size_t k);

/// Row gather, out[i] = table[ids[i]]. Backward scatter-adds.
Var gather_rows(const Var& table, std::span<const std::size_t> ids);

Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);

Var sum_all(const Var& a);
Var mean_all(const Var& a);
/// Mean over all elements of (a - b)^2.
Var mse(const Var& a, const Var& b);
/// Mean over rows of -log softmax(logits[r])[targets[r]].
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets);

}  // namespace flamed::ag
