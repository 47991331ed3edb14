// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense tensors.
//
// A Graph records every operation as a Node. grad() does not compute numbers
// directly: it appends the adjoint computation to the same graph as ordinary
// nodes, so any gradient can itself be differentiated again. This is what
// makes meta-gradients through inner gradient-descent loops exact.
//
// Values are computed eagerly when all inputs are known. Leaves created with
// placeholder() stay unbound until bind(); their descendants are computed on
// demand by eval().

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsml/autodiff/tensor.hpp"

namespace hsml::ad {

class Graph;

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  Concat,
  Slice,
  Reshape,
  SumAll,
  SumRows,
  SumLast,
  BroadcastScalar,
  RepeatRows,
  RepeatCols,
  Tanh,
  Sigmoid,
  Relu,
  Step,
  Exp,
  Log,
  Reciprocal,
  Square,
  Neg,
  BiasAdd,
  Softmax,
  SqDist,
  MaxRows,
  StopGradient,
};

const char* op_name(OpKind kind) noexcept;

class UnboundLeafError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class GradError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Shape& shape() const;
  /// Forward value; computes it first if needed.
  const Tensor& value() const;

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

struct Node {
  OpKind kind = OpKind::Leaf;
  std::vector<std::uint32_t> parents;
  Shape shape;
  // Op attributes. Meaning depends on kind (scale factor, axis, slice bounds,
  // transpose flags, repeat count).
  double scalar = 0.0;
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool trans_a = false;
  bool trans_b = false;
  std::shared_ptr<const Tensor> value;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding a copy of `value`.
  Var leaf(Tensor value);
  /// Leaf sharing an externally owned tensor.
  Var leaf(std::shared_ptr<const Tensor> value);
  Var constant(double v) { return leaf(Tensor::scalar(v)); }
  Var zeros(const Shape& shape) { return leaf(Tensor(shape, 0.0)); }
  /// Leaf with a declared shape and no value yet.
  Var placeholder(Shape shape);
  void bind(Var leaf, Tensor value);

  const Tensor& eval(Var v);
  const Node& node(std::uint32_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Appends a node of the given kind; validates shapes and computes the
  /// value when every parent is known. Used by the op functions in ops.hpp.
  Var add_node(Node node);

  /// Gradients of the scalar `output` with respect to each of `wrt`.
  ///
  /// Each `wrt` node is treated as an independent input: propagation stops
  /// there. Results are nodes of this graph (differentiable again). A `wrt`
  /// node the output does not depend on gets an exact zero tensor.
  std::vector<Var> grad(Var output, std::span<const Var> wrt);

 private:
  void compute(std::uint32_t id);

  std::vector<Node> nodes_;
};

}  // namespace hsml::ad
