// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "flamed/errors.hpp"

namespace flamed {

Tensor::Tensor(std::size_t rows, std::size_t cols, const std::vector<double>& data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
  if (data_.size() != rows * cols) {
    throw ContractError("Tensor: data size " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor Tensor::randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  Tensor t(rows, cols);
  for (auto& v : t.data_) v = stddev * rng.normal();
  return t;
}

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t Tensor::first_nonfinite_row() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) return i / std::max<std::size_t>(cols_, 1);
  }
  return rows_;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "Tensor::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  require_same_shape(*this, o, "Tensor::operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                        b.shape_str());
  }
}

double mean_squared(const Tensor& a) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s / static_cast<double>(a.size());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace flamed
