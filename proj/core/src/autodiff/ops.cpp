// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/autodiff/ops.hpp"

#include <utility>

namespace hsml::ad {
namespace {

[[noreturn]] void mismatch(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + shape_string(a) +
                   " and " + shape_string(b));
}

[[noreturn]] void bad_rank(OpKind kind, const Shape& a, const char* expected) {
  throw ShapeError(std::string(op_name(kind)) + ": operand shape " + shape_string(a) +
                   ", expected " + expected);
}

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) {
    throw std::invalid_argument("operands belong to different graphs");
  }
  return a.graph();
}

Var unary(OpKind kind, Var a) {
  Node n;
  n.kind = kind;
  n.parents = {a.id()};
  n.shape = a.shape();
  return a.graph().add_node(std::move(n));
}

Var elementwise(OpKind kind, Var a, Var b) {
  Graph& g = same_graph(a, b);
  if (a.shape() != b.shape()) mismatch(kind, a.shape(), b.shape());
  Node n;
  n.kind = kind;
  n.parents = {a.id(), b.id()};
  n.shape = a.shape();
  return g.add_node(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return elementwise(OpKind::Add, a, b); }
Var sub(Var a, Var b) { return elementwise(OpKind::Sub, a, b); }
Var mul(Var a, Var b) { return elementwise(OpKind::Mul, a, b); }

Var scale(Var a, double factor) {
  Node n;
  n.kind = OpKind::Scale;
  n.parents = {a.id()};
  n.shape = a.shape();
  n.scalar = factor;
  return a.graph().add_node(std::move(n));
}

Var neg(Var a) { return unary(OpKind::Neg, a); }

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Graph& g = same_graph(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2) mismatch(OpKind::MatMul, sa, sb);
  const std::size_t m = trans_a ? sa[1] : sa[0];
  const std::size_t ka = trans_a ? sa[0] : sa[1];
  const std::size_t kb = trans_b ? sb[1] : sb[0];
  const std::size_t p = trans_b ? sb[0] : sb[1];
  if (ka != kb) mismatch(OpKind::MatMul, sa, sb);
  Node n;
  n.kind = OpKind::MatMul;
  n.parents = {a.id(), b.id()};
  n.shape = {m, p};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return g.add_node(std::move(n));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Graph& g = parts.front().graph();
  const Shape& first = parts.front().shape();
  if (first.empty() || first.size() > 2 || axis >= first.size()) {
    bad_rank(OpKind::Concat, first, "rank 1 or 2 with axis < rank");
  }
  Node n;
  n.kind = OpKind::Concat;
  n.axis = axis;
  n.shape = first;
  n.shape[axis] = 0;
  for (const Var& p : parts) {
    same_graph(parts.front(), p);
    const Shape& s = p.shape();
    if (s.size() != first.size()) mismatch(OpKind::Concat, first, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) mismatch(OpKind::Concat, first, s);
    }
    n.shape[axis] += s[axis];
    n.parents.push_back(p.id());
  }
  return g.add_node(std::move(n));
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (s.empty() || s.size() > 2 || axis >= s.size()) {
    bad_rank(OpKind::Slice, s, "rank 1 or 2 with axis < rank");
  }
  if (begin > end || end > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for shape " + shape_string(s));
  }
  Node n;
  n.kind = OpKind::Slice;
  n.parents = {a.id()};
  n.shape = s;
  n.shape[axis] = end - begin;
  n.axis = axis;
  n.begin = begin;
  n.end = end;
  return a.graph().add_node(std::move(n));
}

Var reshape(Var a, Shape shape) {
  if (shape_numel(shape) != shape_numel(a.shape())) {
    mismatch(OpKind::Reshape, a.shape(), shape);
  }
  if (shape == a.shape()) return a;
  Node n;
  n.kind = OpKind::Reshape;
  n.parents = {a.id()};
  n.shape = std::move(shape);
  return a.graph().add_node(std::move(n));
}

Var sum(Var a) {
  Node n;
  n.kind = OpKind::SumAll;
  n.parents = {a.id()};
  return a.graph().add_node(std::move(n));
}

Var mean(Var a) {
  const std::size_t count = shape_numel(a.shape());
  if (count == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var sum_rows(Var a) {
  if (a.shape().size() != 2) bad_rank(OpKind::SumRows, a.shape(), "rank 2");
  Node n;
  n.kind = OpKind::SumRows;
  n.parents = {a.id()};
  n.shape = {a.shape()[1]};
  return a.graph().add_node(std::move(n));
}

Var sum_last(Var a) {
  if (a.shape().size() != 2) bad_rank(OpKind::SumLast, a.shape(), "rank 2");
  Node n;
  n.kind = OpKind::SumLast;
  n.parents = {a.id()};
  n.shape = {a.shape()[0]};
  return a.graph().add_node(std::move(n));
}

Var max_rows(Var a) {
  if (a.shape().size() != 2 || a.shape()[0] == 0) {
    bad_rank(OpKind::MaxRows, a.shape(), "rank 2 with at least one row");
  }
  Node n;
  n.kind = OpKind::MaxRows;
  n.parents = {a.id()};
  n.shape = {a.shape()[1]};
  return a.graph().add_node(std::move(n));
}

Var broadcast_scalar(Var a, Shape shape) {
  if (shape_numel(a.shape()) != 1) bad_rank(OpKind::BroadcastScalar, a.shape(), "one element");
  Node n;
  n.kind = OpKind::BroadcastScalar;
  n.parents = {a.id()};
  n.shape = std::move(shape);
  return a.graph().add_node(std::move(n));
}

Var repeat_rows(Var a, std::size_t count) {
  if (a.shape().size() != 1) bad_rank(OpKind::RepeatRows, a.shape(), "rank 1");
  Node n;
  n.kind = OpKind::RepeatRows;
  n.parents = {a.id()};
  n.shape = {count, a.shape()[0]};
  return a.graph().add_node(std::move(n));
}

Var repeat_cols(Var a, std::size_t count) {
  if (a.shape().size() != 1) bad_rank(OpKind::RepeatCols, a.shape(), "rank 1");
  Node n;
  n.kind = OpKind::RepeatCols;
  n.parents = {a.id()};
  n.shape = {a.shape()[0], count};
  return a.graph().add_node(std::move(n));
}

Var tanh(Var a) { return unary(OpKind::Tanh, a); }
Var sigmoid(Var a) { return unary(OpKind::Sigmoid, a); }
Var relu(Var a) { return unary(OpKind::Relu, a); }
Var step(Var a) { return unary(OpKind::Step, a); }
Var exp(Var a) { return unary(OpKind::Exp, a); }
Var log(Var a) { return unary(OpKind::Log, a); }
Var reciprocal(Var a) { return unary(OpKind::Reciprocal, a); }
Var square(Var a) { return unary(OpKind::Square, a); }
Var stop_gradient(Var a) { return unary(OpKind::StopGradient, a); }

Var bias_add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool ok = sb.size() == 1 && !sa.empty() && sa.size() <= 2 && sa.back() == sb[0];
  if (!ok) mismatch(OpKind::BiasAdd, sa, sb);
  Node n;
  n.kind = OpKind::BiasAdd;
  n.parents = {a.id(), b.id()};
  n.shape = sa;
  return g.add_node(std::move(n));
}

Var softmax(Var a) {
  const Shape& s = a.shape();
  if (s.empty() || s.size() > 2) bad_rank(OpKind::Softmax, s, "rank 1 or 2");
  return unary(OpKind::Softmax, a);
}

Var sq_dist(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) mismatch(OpKind::SqDist, sa, sb);
  Node n;
  n.kind = OpKind::SqDist;
  n.parents = {a.id(), b.id()};
  n.shape = {sa[0], sb[0]};
  return g.add_node(std::move(n));
}

}  // namespace hsml::ad
