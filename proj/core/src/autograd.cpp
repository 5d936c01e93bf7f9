// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "flamed/errors.hpp"

namespace flamed::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

MapConstMat as_mat(const Tensor& t) {
  return MapConstMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
MapMat as_mat(Tensor& t) {
  return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

Var make(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled &&
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; })) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

void check_same(const Var& a, const Var& b, const char* op) {
  require_same_shape(a.value(), b.value(), op);
}

void check_row(const Var& a, const Var& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ContractError(std::string(op) + ": expected 1x" + std::to_string(a.cols()) +
                        " row, got " + row.value().shape_str());
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Tensor& Node::grad_buffer() {
  if (!grad.same_shape(value)) grad = Tensor(value.rows(), value.cols());
  return grad;
}

double Var::item() const {
  if (value().size() != 1) throw ContractError("Var::item on non-scalar " + value().shape_str());
  return value()[0];
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return Var(std::move(node));
}

Var parameter(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.value().size() != 1) throw ContractError("backward: loss must be 1x1");
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same(a, b, "add");
  return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  check_same(a, b, "sub");
  return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad) self.parents[1]->grad_buffer() -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  check_same(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.node()}, [s](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return make(std::move(out), {a.node()},
              [](Node& self) { self.parents[0]->grad_buffer() += self.grad; });
}

Var add_row(const Var& a, const Var& row) {
  check_row(a, row, "add_row");
  Tensor out = a.value();
  const std::size_t c = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out(r, j) += row.value()[j];
  return make(std::move(out), {a.node(), row.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t r = 0; r < self.grad.rows(); ++r)
        for (std::size_t j = 0; j < self.grad.cols(); ++j) g[j] += self.grad(r, j);
    }
  });
}

Var mul_row(const Var& a, const Var& row) {
  check_row(a, row, "mul_row");
  Tensor out = a.value();
  const std::size_t c = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out(r, j) *= row.value()[j];
  return make(std::move(out), {a.node(), row.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pr = *self.parents[1];
    const std::size_t rows = self.grad.rows(), cols = self.grad.cols();
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) g(r, j) += self.grad(r, j) * pr.value[j];
    }
    if (pr.requires_grad) {
      Tensor& g = pr.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) g[j] += self.grad(r, j) * pa.value(r, j);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dims differ " + a.value().shape_str() + " * " +
                        b.value().shape_str());
  }
  Tensor out(a.rows(), b.cols());
  as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
  return make(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad)
      as_mat(pa.grad_buffer()).noalias() += as_mat(self.grad) * as_mat(pb.value).transpose();
    if (pb.requires_grad)
      as_mat(pb.grad_buffer()).noalias() += as_mat(pa.value).transpose() * as_mat(self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw ContractError("matmul_nt: inner dims differ " + a.value().shape_str() + " * " +
                        b.value().shape_str() + "^T");
  }
  Tensor out(a.rows(), b.rows());
  as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value()).transpose();
  return make(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) as_mat(pa.grad_buffer()).noalias() += as_mat(self.grad) * as_mat(pb.value);
    if (pb.requires_grad)
      as_mat(pb.grad_buffer()).noalias() += as_mat(self.grad).transpose() * as_mat(pa.value);
  });
}

Var affine(const Var& x, const Var& w, const Var& bias) {
  if (x.cols() != w.rows()) {
    throw ContractError("affine: input " + x.value().shape_str() + " vs weight " +
                        w.value().shape_str());
  }
  if (bias.rows() != 1 || bias.cols() != w.cols()) {
    throw ContractError("affine: bias " + bias.value().shape_str() + " vs weight " +
                        w.value().shape_str());
  }
  Tensor out(x.rows(), w.cols());
  as_mat(out).noalias() = as_mat(x.value()) * as_mat(w.value());
  as_mat(out).rowwise() += as_mat(bias.value()).row(0);
  return make(std::move(out), {x.node(), w.node(), bias.node()}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    if (px.requires_grad) as_mat(px.grad_buffer()).noalias() += as_mat(self.grad) * as_mat(pw.value).transpose();
    if (pw.requires_grad) as_mat(pw.grad_buffer()).noalias() += as_mat(px.value).transpose() * as_mat(self.grad);
    if (pb.requires_grad) as_mat(pb.grad_buffer()).row(0) += as_mat(self.grad).colwise().sum();
  });
}

Var gelu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.values()) {
    const double x = v;
    v = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
  }
  return make(std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = p.value[i];
      const double u = kGeluC * (x + 0.044715 * x * x * x);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
      g[i] += self.grad[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
    }
  });
}

Var silu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v / (1.0 + std::exp(-v));
  return make(std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = p.value[i];
      const double s = 1.0 / (1.0 + std::exp(-x));
      g[i] += self.grad[i] * (s * (1.0 + x * (1.0 - s)));
    }
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::max(v, 0.0);
  return make(std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.value[i] > 0.0) g[i] += self.grad[i];
  });
}

Var layer_norm(const Var& a, double eps) {
  const std::size_t rows = a.rows(), cols = a.cols();
  Tensor out(rows, cols);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto x = a.value().row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < cols; ++j) out(r, j) = (x[j] - mean) * is;
  }
  return make(out, {a.node()}, [inv_std, y = out](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double mg = 0.0, mgy = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        mg += self.grad(r, j);
        mgy += self.grad(r, j) * y(r, j);
      }
      mg /= static_cast<double>(cols);
      mgy /= static_cast<double>(cols);
      for (std::size_t j = 0; j < cols; ++j)
        g(r, j) += (*inv_std)[r] * (self.grad(r, j) - mg - y(r, j) * mgy);
    }
  });
}

Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto x = out.row(r);
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (auto& v : x) {
      v = std::exp(v - m);
      s += v;
    }
    for (auto& v : x) v /= s;
  }
  return make(out, {a.node()}, [y = out](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += self.grad(r, j) * y(r, j);
      for (std::size_t j = 0; j < y.cols(); ++j) g(r, j) += y(r, j) * (self.grad(r, j) - dot);
    }
  });
}

Var depthwise_conv1d(const Var& x, const Var& w, const Var& bias) {
  const std::size_t len = x.rows(), ch = x.cols(), k = w.rows();
  if (w.cols() != ch || k % 2 == 0) {
    throw ContractError("depthwise_conv1d: kernel " + w.value().shape_str() +
                        " incompatible with input " + x.value().shape_str());
  }
  check_row(x, bias, "depthwise_conv1d bias");
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out(len, ch);
  for (std::size_t t = 0; t < len; ++t) {
    double* o = &out(t, 0);
    for (std::size_t c = 0; c < ch; ++c) o[c] = bias.value()[c];
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - radius;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      const double* xi = &x.value()(static_cast<std::size_t>(src), 0);
      const double* wj = &w.value()(j, 0);
      for (std::size_t c = 0; c < ch; ++c) o[c] += wj[c] * xi[c];
    }
  }
  return make(std::move(out), {x.node(), w.node(), bias.node()}, [radius](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const std::size_t len = px.value.rows(), ch = px.value.cols(), k = pw.value.rows();
    Tensor* gx = px.requires_grad ? &px.grad_buffer() : nullptr;
    Tensor* gw = pw.requires_grad ? &pw.grad_buffer() : nullptr;
    for (std::size_t t = 0; t < len; ++t) {
      const double* go = &self.grad(t, 0);
      if (pb.requires_grad) {
        Tensor& gb = pb.grad_buffer();
        for (std::size_t c = 0; c < ch; ++c) gb[c] += go[c];
      }
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - radius;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const auto s = static_cast<std::size_t>(src);
        if (gx) {
          double* gxi = &(*gx)(s, 0);
          const double* wj = &pw.value(j, 0);
          for (std::size_t c = 0; c < ch; ++c) gxi[c] += wj[c] * go[c];
        }
        if (gw) {
          double* gwj = &(*gw)(j, 0);
          const double* xi = &px.value(s, 0);
          for (std::size_t c = 0; c < ch; ++c) gwj[c] += xi[c] * go[c];
        }
      }
    }
  });
}

Var unfold_rows(const Var& x, std::size_t k) {
  if (k % 2 == 0) throw ContractError("unfold_rows: kernel size must be odd");
  const std::size_t len = x.rows(), ch = x.cols();
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out(len, k * ch);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - radius;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      std::copy_n(&x.value()(static_cast<std::size_t>(src), 0), ch, &out(t, j * ch));
    }
  }
  return make(std::move(out), {x.node()}, [k, radius](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const std::size_t len = g.rows(), ch = g.cols();
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - radius;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        double* gi = &g(static_cast<std::size_t>(src), 0);
        const double* go = &self.grad(t, j * ch);
        for (std::size_t c = 0; c < ch; ++c) gi[c] += go[c];
      }
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> ids) {
  const std::size_t cols = table.cols();
  Tensor out(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) {
      throw DataError("gather_rows: index " + std::to_string(ids[i]) + " out of range for " +
                      std::to_string(table.rows()) + " rows");
    }
    std::copy_n(&table.value()(ids[i], 0), cols, &out(i, 0));
  }
  return make(std::move(out), {table.node()},
              [idx = std::vector<std::size_t>(ids.begin(), ids.end())](Node& self) {
                Tensor& g = self.parents[0]->grad_buffer();
                const std::size_t cols = g.cols();
                for (std::size_t i = 0; i < idx.size(); ++i) {
                  double* gi = &g(idx[i], 0);
                  const double* go = &self.grad(i, 0);
                  for (std::size_t c = 0; c < cols; ++c) gi[c] += go[c];
                }
              });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ContractError("concat_rows: column count mismatch");
    rows += p.rows();
    parents.push_back(p.node());
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset * cols);
    offset += p.rows();
  }
  return make(std::move(out), std::move(parents), [](Node& self) {
    std::size_t offset = 0;
    const std::size_t cols = self.grad.cols();
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        Tensor& g = p->grad_buffer();
        const double* src = self.grad.data() + offset * cols;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
      }
      offset += p->value.rows();
    }
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw ContractError("slice_rows: range exceeds row count");
  const std::size_t cols = a.cols();
  Tensor out(count, cols);
  std::copy_n(a.value().data() + begin * cols, count * cols, out.data());
  return make(std::move(out), {a.node()}, [begin](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    double* dst = g.data() + begin * g.cols();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ContractError("concat_cols: row count mismatch");
    cols += p.cols();
    parents.push_back(p.node());
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(&p.value()(r, 0), p.cols(), &out(r, offset));
    offset += p.cols();
  }
  return make(std::move(out), std::move(parents), [](Node& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      const std::size_t pc = p->value.cols();
      if (p->requires_grad) {
        Tensor& g = p->grad_buffer();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < pc; ++j) g(r, j) += self.grad(r, offset + j);
      }
      offset += pc;
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ContractError("slice_cols: range exceeds column count");
  Tensor out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r) std::copy_n(&a.value()(r, begin), count, &out(r, 0));
  return make(std::move(out), {a.node()}, [begin](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t j = 0; j < self.grad.cols(); ++j) g(r, begin + j) += self.grad(r, j);
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make(Tensor::scalar(s), {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double go = self.grad[0];
    for (auto& v : g.values()) v += go;
  });
}

Var mean_all(const Var& a) {
  if (a.value().empty()) throw ContractError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mse(const Var& a, const Var& b) {
  check_same(a, b, "mse");
  if (a.value().empty()) throw ContractError("mse: empty tensor");
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make(Tensor::scalar(s / n), {a.node(), b.node()}, [n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double go = self.grad[0] * 2.0 / n;
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * (pa.value[i] - pb.value[i]);
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go * (pa.value[i] - pb.value[i]);
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (targets.size() != rows) {
    throw ContractError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(rows) + " rows");
  }
  if (rows == 0) throw ContractError("cross_entropy: empty logits");
  Tensor probs(rows, cols);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) {
      throw DataError("cross_entropy: target " + std::to_string(targets[r]) +
                      " outside vocabulary of size " + std::to_string(cols));
    }
    auto x = logits.value().row(r);
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      probs(r, j) = std::exp(x[j] - m);
      s += probs(r, j);
    }
    for (std::size_t j = 0; j < cols; ++j) probs(r, j) /= s;
    total += (m + std::log(s)) - x[targets[r]];
  }
  const double n = static_cast<double>(rows);
  return make(Tensor::scalar(total / n), {logits.node()},
              [probs = std::move(probs), idx = std::vector<std::size_t>(targets.begin(), targets.end()),
               n](Node& self) {
                Tensor& g = self.parents[0]->grad_buffer();
                const double go = self.grad[0] / n;
                for (std::size_t r = 0; r < probs.rows(); ++r) {
                  for (std::size_t j = 0; j < probs.cols(); ++j) g(r, j) += go * probs(r, j);
                  g(r, idx[r]) -= go;
                }
              });
}

}  // namespace flamed::ag
