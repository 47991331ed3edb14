// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsml/autodiff/ops.hpp"

namespace hsml::ad {

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::MatMul: return "matmul";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Reshape: return "reshape";
    case OpKind::SumAll: return "sum";
    case OpKind::SumRows: return "sum_rows";
    case OpKind::SumLast: return "sum_last";
    case OpKind::BroadcastScalar: return "broadcast_scalar";
    case OpKind::RepeatRows: return "repeat_rows";
    case OpKind::RepeatCols: return "repeat_cols";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Relu: return "relu";
    case OpKind::Step: return "step";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Reciprocal: return "reciprocal";
    case OpKind::Square: return "square";
    case OpKind::Neg: return "neg";
    case OpKind::BiasAdd: return "bias_add";
    case OpKind::Softmax: return "softmax";
    case OpKind::SqDist: return "sq_dist";
    case OpKind::MaxRows: return "max_rows";
    case OpKind::StopGradient: return "stop_gradient";
  }
  return "unknown";
}

const Shape& Var::shape() const { return graph_->node(id_).shape; }

const Tensor& Var::value() const { return graph_->eval(*this); }

Var Graph::leaf(Tensor value) {
  return leaf(std::make_shared<const Tensor>(std::move(value)));
}

Var Graph::leaf(std::shared_ptr<const Tensor> value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.shape = value->shape();
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::placeholder(Shape shape) {
  Node n;
  n.kind = OpKind::Leaf;
  n.shape = std::move(shape);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Graph::bind(Var leaf, Tensor value) {
  Node& n = nodes_.at(leaf.id());
  if (n.kind != OpKind::Leaf) throw std::logic_error("bind: node is not a leaf");
  if (n.value) throw std::logic_error("bind: leaf is already bound");
  if (value.shape() != n.shape) {
    throw ShapeError("bind: value shape " + shape_string(value.shape()) +
                     " does not match leaf shape " + shape_string(n.shape));
  }
  n.value = std::make_shared<const Tensor>(std::move(value));
}

Var Graph::add_node(Node node) {
  const bool ready = std::all_of(node.parents.begin(), node.parents.end(),
                                 [this](std::uint32_t p) { return nodes_[p].value != nullptr; });
  nodes_.push_back(std::move(node));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  if (ready) compute(id);
  return Var(this, id);
}

const Tensor& Graph::eval(Var v) {
  const std::uint32_t target = v.id();
  if (nodes_.at(target).value) return *nodes_[target].value;

  std::vector<char> pending(target + 1, 0);
  pending[target] = 1;
  for (std::uint32_t id = target + 1; id-- > 0;) {
    if (!pending[id]) continue;
    const Node& n = nodes_[id];
    if (n.kind == OpKind::Leaf) {
      throw UnboundLeafError("eval: leaf " + std::to_string(id) + " with shape " +
                             shape_string(n.shape) + " is unbound");
    }
    for (std::uint32_t p : n.parents) {
      if (!nodes_[p].value) pending[p] = 1;
    }
  }
  for (std::uint32_t id = 0; id <= target; ++id) {
    if (pending[id]) compute(id);
  }
  return *nodes_[target].value;
}

namespace {

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const auto x = a.data();
  const auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

Tensor matmul_kernel(const Tensor& a, const Tensor& b, const Shape& out_shape, bool ta,
                     bool tb) {
  const std::size_t m = out_shape[0];
  const std::size_t p = out_shape[1];
  const std::size_t k_dim = ta ? a.dim(0) : a.dim(1);
  Tensor out(out_shape);
  double* c = out.data().data();
  const double* x = a.data().data();
  const double* y = b.data().data();
  // Every output element accumulates over k in increasing order.
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      double* row = c + i * p;
      for (std::size_t k = 0; k < k_dim; ++k) {
        const double aik = x[i * k_dim + k];
        const double* brow = y + k * p;
        for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < k_dim; ++k) s += x[i * k_dim + k] * y[j * k_dim + k];
        c[i * p + j] = s;
      }
    }
  } else if (ta && !tb) {
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double* brow = y + k * p;
      for (std::size_t i = 0; i < m; ++i) {
        const double aki = x[k * m + i];
        double* row = c + i * p;
        for (std::size_t j = 0; j < p; ++j) row[j] += aki * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < k_dim; ++k) s += x[k * m + i] * y[j * k_dim + k];
        c[i * p + j] = s;
      }
    }
  }
  return out;
}

// Rows and columns of a rank-1/2 tensor viewed as a matrix (rank 1 = one row).
std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

}  // namespace

void Graph::compute(std::uint32_t id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t i) -> const Tensor& { return *nodes_[n.parents[i]].value; };
  Tensor out;
  switch (n.kind) {
    case OpKind::Leaf:
      return;
    case OpKind::Add:
      out = map_binary(in(0), in(1), [](double x, double y) { return x + y; });
      break;
    case OpKind::Sub:
      out = map_binary(in(0), in(1), [](double x, double y) { return x - y; });
      break;
    case OpKind::Mul:
      out = map_binary(in(0), in(1), [](double x, double y) { return x * y; });
      break;
    case OpKind::Scale: {
      const double f = n.scalar;
      out = map_unary(in(0), [f](double x) { return x * f; });
      break;
    }
    case OpKind::MatMul:
      out = matmul_kernel(in(0), in(1), n.shape, n.trans_a, n.trans_b);
      break;
    case OpKind::Concat: {
      out = Tensor(n.shape);
      auto dst = out.data();
      const std::size_t rows = rows_of(n.shape);
      const std::size_t cols = cols_of(n.shape);
      if (n.axis == 0) {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const auto src = in(i).data();
          std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
          offset += src.size();
        }
      } else {
        std::size_t col0 = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const Tensor& part = in(i);
          const std::size_t pc = part.dim(1);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < pc; ++c) dst[r * cols + col0 + c] = part[r * pc + c];
          }
          col0 += pc;
        }
      }
      break;
    }
    case OpKind::Slice: {
      const Tensor& a = in(0);
      out = Tensor(n.shape);
      auto dst = out.data();
      if (n.axis == 0) {
        const std::size_t stride = a.rank() == 2 ? a.dim(1) : 1;
        const auto src = a.data();
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(n.begin * stride),
                  src.begin() + static_cast<std::ptrdiff_t>(n.end * stride), dst.begin());
      } else {
        const std::size_t rows = a.dim(0);
        const std::size_t cols = a.dim(1);
        const std::size_t width = n.end - n.begin;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < width; ++c) dst[r * width + c] = a[r * cols + n.begin + c];
        }
      }
      break;
    }
    case OpKind::Reshape:
      out = Tensor(n.shape, in(0).values());
      break;
    case OpKind::SumAll: {
      double s = 0.0;
      for (double v : in(0).data()) s += v;
      out = Tensor::scalar(s);
      break;
    }
    case OpKind::SumRows: {
      const Tensor& a = in(0);
      out = Tensor(n.shape);
      const std::size_t rows = a.dim(0);
      const std::size_t cols = a.dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[c] += a[r * cols + c];
      }
      break;
    }
    case OpKind::SumLast: {
      const Tensor& a = in(0);
      out = Tensor(n.shape);
      const std::size_t rows = a.dim(0);
      const std::size_t cols = a.dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c];
        out[r] = s;
      }
      break;
    }
    case OpKind::MaxRows: {
      const Tensor& a = in(0);
      out = Tensor(n.shape, -std::numeric_limits<double>::infinity());
      const std::size_t rows = a.dim(0);
      const std::size_t cols = a.dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[c] = std::max(out[c], a[r * cols + c]);
      }
      break;
    }
    case OpKind::BroadcastScalar:
      out = Tensor(n.shape, in(0)[0]);
      break;
    case OpKind::RepeatRows: {
      const Tensor& a = in(0);
      out = Tensor(n.shape);
      const std::size_t cols = a.size();
      for (std::size_t r = 0; r < n.shape[0]; ++r) {
        std::copy(a.data().begin(), a.data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(r * cols));
      }
      break;
    }
    case OpKind::RepeatCols: {
      const Tensor& a = in(0);
      out = Tensor(n.shape);
      const std::size_t cols = n.shape[1];
      for (std::size_t r = 0; r < n.shape[0]; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = a[r];
      }
      break;
    }
    case OpKind::Tanh:
      out = map_unary(in(0), [](double x) { return std::tanh(x); });
      break;
    case OpKind::Sigmoid:
      out = map_unary(in(0), sigmoid_scalar);
      break;
    case OpKind::Relu:
      out = map_unary(in(0), [](double x) { return x > 0.0 ? x : 0.0; });
      break;
    case OpKind::Step:
      out = map_unary(in(0), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
      break;
    case OpKind::Exp:
      out = map_unary(in(0), [](double x) { return std::exp(x); });
      break;
    case OpKind::Log:
      out = map_unary(in(0), [](double x) { return std::log(x); });
      break;
    case OpKind::Reciprocal:
      out = map_unary(in(0), [](double x) { return 1.0 / x; });
      break;
    case OpKind::Square:
      out = map_unary(in(0), [](double x) { return x * x; });
      break;
    case OpKind::Neg:
      out = map_unary(in(0), [](double x) { return -x; });
      break;
    case OpKind::BiasAdd: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      out = Tensor(a.shape());
      const std::size_t cols = b.size();
      const std::size_t rows = a.size() / std::max<std::size_t>(cols, 1);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = a[r * cols + c] + b[c];
      }
      break;
    }
    case OpKind::Softmax: {
      const Tensor& a = in(0);
      out = Tensor(a.shape());
      const std::size_t cols = cols_of(a.shape());
      const std::size_t rows = rows_of(a.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = a.data().data() + r * cols;
        double* dst = out.data().data() + r * cols;
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c) hi = std::max(hi, src[c]);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dst[c] = std::exp(src[c] - hi);
          total += dst[c];
        }
        for (std::size_t c = 0; c < cols; ++c) dst[c] /= total;
      }
      break;
    }
    case OpKind::SqDist: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      out = Tensor(n.shape);
      const std::size_t rows = a.dim(0);
      const std::size_t centers = b.dim(0);
      const std::size_t d = a.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < centers; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            const double diff = a[i * d + k] - b[j * d + k];
            s += diff * diff;
          }
          out[i * centers + j] = s;
        }
      }
      break;
    }
    case OpKind::StopGradient:
      n.value = nodes_[n.parents[0]].value;
      return;
  }
  n.value = std::make_shared<const Tensor>(std::move(out));
}

namespace {

bool passes_gradient(OpKind kind) {
  return kind != OpKind::Step && kind != OpKind::StopGradient && kind != OpKind::Leaf;
}

// Vector-Jacobian product of node `self` with upstream adjoint `g`, for the
// parent at position `slot`. Built entirely from primitive ops.
Var vjp(Graph& graph, std::uint32_t self_id, std::size_t slot, Var g) {
  // Copy: building new nodes may reallocate the node storage.
  const Node n = graph.node(self_id);
  const Var self(&graph, self_id);
  auto parent = [&](std::size_t i) { return Var(&graph, n.parents[i]); };

  switch (n.kind) {
    case OpKind::Add:
      return g;
    case OpKind::Sub:
      return slot == 0 ? g : neg(g);
    case OpKind::Mul:
      return mul(g, parent(1 - slot));
    case OpKind::Scale:
      return scale(g, n.scalar);
    case OpKind::Neg:
      return neg(g);
    case OpKind::MatMul: {
      const Var a = parent(0);
      const Var b = parent(1);
      const bool ta = n.trans_a;
      const bool tb = n.trans_b;
      if (slot == 0) {
        if (!ta && !tb) return matmul(g, b, false, true);
        if (!ta && tb) return matmul(g, b, false, false);
        if (ta && !tb) return matmul(b, g, false, true);
        return matmul(b, g, true, true);
      }
      if (!ta && !tb) return matmul(a, g, true, false);
      if (!ta && tb) return matmul(g, a, true, false);
      if (ta && !tb) return matmul(a, g, false, false);
      return matmul(g, a, true, true);
    }
    case OpKind::Concat: {
      std::size_t begin = 0;
      for (std::size_t i = 0; i < slot; ++i) begin += parent(i).shape()[n.axis];
      const std::size_t end = begin + parent(slot).shape()[n.axis];
      return slice(g, n.axis, begin, end);
    }
    case OpKind::Slice: {
      const Shape full = parent(0).shape();
      std::vector<Var> parts;
      if (n.begin > 0) {
        Shape before = full;
        before[n.axis] = n.begin;
        parts.push_back(graph.zeros(before));
      }
      parts.push_back(g);
      if (n.end < full[n.axis]) {
        Shape after = full;
        after[n.axis] = full[n.axis] - n.end;
        parts.push_back(graph.zeros(after));
      }
      if (parts.size() == 1) return g;
      return concat(parts, n.axis);
    }
    case OpKind::Reshape:
      return reshape(g, parent(0).shape());
    case OpKind::SumAll:
      return broadcast_scalar(g, parent(0).shape());
    case OpKind::SumRows:
      return repeat_rows(g, parent(0).shape()[0]);
    case OpKind::SumLast:
      return repeat_cols(g, parent(0).shape()[1]);
    case OpKind::MaxRows: {
      const Tensor& a = parent(0).value();
      const std::size_t rows = a.dim(0);
      const std::size_t cols = a.dim(1);
      Tensor mask(a.shape());
      for (std::size_t c = 0; c < cols; ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < rows; ++r) {
          if (a[r * cols + c] > a[best * cols + c]) best = r;
        }
        mask[best * cols + c] = 1.0;
      }
      return mul(repeat_rows(g, rows), graph.leaf(std::move(mask)));
    }
    case OpKind::BroadcastScalar:
      return reshape(sum(g), parent(0).shape());
    case OpKind::RepeatRows:
      return sum_rows(g);
    case OpKind::RepeatCols:
      return sum_last(g);
    case OpKind::Tanh:
      return sub(g, mul(g, square(self)));
    case OpKind::Sigmoid:
      return mul(g, sub(self, square(self)));
    case OpKind::Relu:
      return mul(g, step(parent(0)));
    case OpKind::Exp:
      return mul(g, self);
    case OpKind::Log:
      return mul(g, reciprocal(parent(0)));
    case OpKind::Reciprocal:
      return neg(mul(g, square(self)));
    case OpKind::Square:
      return scale(mul(g, parent(0)), 2.0);
    case OpKind::BiasAdd:
      if (slot == 0) return g;
      return g.shape().size() == 2 ? sum_rows(g) : g;
    case OpKind::Softmax: {
      const Var gy = mul(g, self);
      Var total;
      if (n.shape.size() == 2) {
        total = repeat_cols(sum_last(gy), n.shape[1]);
      } else {
        total = broadcast_scalar(sum(gy), n.shape);
      }
      return sub(gy, mul(self, total));
    }
    case OpKind::SqDist: {
      const Var a = parent(0);
      const Var b = parent(1);
      const std::size_t d = a.shape()[1];
      if (slot == 0) {
        const Var weight = repeat_cols(sum_last(g), d);
        return scale(sub(mul(weight, a), matmul(g, b)), 2.0);
      }
      const Var weight = repeat_cols(sum_rows(g), d);
      return scale(sub(mul(weight, b), matmul(g, a, true, false)), 2.0);
    }
    case OpKind::Leaf:
    case OpKind::Step:
    case OpKind::StopGradient:
      break;
  }
  throw GradError(std::string("no derivative for op ") + op_name(n.kind));
}

}  // namespace

std::vector<Var> Graph::grad(Var output, std::span<const Var> wrt) {
  if (&output.graph() != this) throw GradError("grad: output belongs to another graph");
  if (shape_numel(output.shape()) != 1) {
    throw GradError("grad: output must be scalar, got shape " + shape_string(output.shape()));
  }
  const std::uint32_t out = output.id();
  const std::size_t count = static_cast<std::size_t>(out) + 1;

  std::vector<char> is_wrt(count, 0);
  for (const Var& w : wrt) {
    if (&w.graph() != this) throw GradError("grad: wrt node belongs to another graph");
    if (w.id() <= out) is_wrt[w.id()] = 1;
  }

  // Nodes that depend on some wrt node through differentiable edges.
  std::vector<char> live(count, 0);
  for (std::uint32_t id = 0; id < count; ++id) {
    if (is_wrt[id]) {
      live[id] = 1;
      continue;
    }
    const Node& n = nodes_[id];
    if (!passes_gradient(n.kind)) continue;
    for (std::uint32_t p : n.parents) {
      if (live[p]) {
        live[id] = 1;
        break;
      }
    }
  }

  std::vector<std::optional<Var>> adjoint(count);
  if (live[out]) adjoint[out] = leaf(Tensor(output.shape(), 1.0));

  for (std::uint32_t id = out + 1; id-- > 0;) {
    if (!adjoint[id] || is_wrt[id]) continue;
    const Var g = *adjoint[id];
    const std::size_t parent_count = nodes_[id].parents.size();
    for (std::size_t slot = 0; slot < parent_count; ++slot) {
      const std::uint32_t p = nodes_[id].parents[slot];
      if (!live[p]) continue;
      const Var contribution = vjp(*this, id, slot, g);
      adjoint[p] = adjoint[p] ? add(*adjoint[p], contribution) : contribution;
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= out && adjoint[w.id()]) {
      result.push_back(*adjoint[w.id()]);
    } else {
      result.push_back(zeros(w.shape()));
    }
  }
  return result;
}

}  // namespace hsml::ad
