// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/learner.hpp"

#include <cmath>

#include "hsml/autodiff/ops.hpp"

namespace hsml {

std::string_view activation_name(Activation a) noexcept {
  return a == Activation::Relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view reduction_name(LossReduction r) noexcept {
  return r == LossReduction::Mean ? "mean" : "sum";
}

LossReduction parse_reduction(std::string_view name) {
  if (name == "mean") return LossReduction::Mean;
  if (name == "sum") return LossReduction::Sum;
  throw std::invalid_argument("unknown loss reduction '" + std::string(name) + "'");
}

std::vector<LayerSlot> MlpArch::layout() const {
  std::vector<LayerSlot> slots;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerSlot s;
    s.in = widths[l];
    s.out = widths[l + 1];
    s.weight_offset = offset;
    offset += s.in * s.out;
    s.bias_offset = offset;
    offset += s.out;
    slots.push_back(s);
  }
  return slots;
}

std::size_t MlpArch::param_count() const {
  const auto slots = layout();
  return slots.empty() ? 0 : slots.back().bias_offset + slots.back().out;
}

ad::Tensor init_params(const MlpArch& arch, Rng& rng, double weight_std) {
  ad::Tensor theta(ad::Shape{arch.param_count()}, 0.0);
  for (const LayerSlot& s : arch.layout()) {
    for (std::size_t i = 0; i < s.in * s.out; ++i) {
      theta[s.weight_offset + i] = rng.truncated_normal(weight_std);
    }
  }
  return theta;
}

ad::Var forward(const MlpArch& arch, ad::Var params, ad::Var x) {
  const std::size_t expected = arch.param_count();
  if (params.shape() != ad::Shape{expected}) {
    throw ad::ShapeError("forward: parameter vector has shape " + ad::shape_string(params.shape()) +
                         ", architecture needs [" + std::to_string(expected) + "]");
  }
  const auto slots = arch.layout();
  ad::Var h = x;
  for (std::size_t l = 0; l < slots.size(); ++l) {
    const LayerSlot& s = slots[l];
    const ad::Var w = ad::reshape(
        ad::slice(params, 0, s.weight_offset, s.weight_offset + s.in * s.out), {s.in, s.out});
    const ad::Var b = ad::slice(params, 0, s.bias_offset, s.bias_offset + s.out);
    h = ad::bias_add(ad::matmul(h, w), b);
    if (l + 1 < slots.size()) {
      h = arch.hidden == Activation::Relu ? ad::relu(h) : ad::tanh(h);
    }
  }
  return h;
}

ad::Var mse_loss(ad::Var prediction, ad::Var target, LossReduction reduction) {
  const ad::Shape& shape = prediction.shape();
  if (shape.empty() || shape[0] == 0) {
    throw std::invalid_argument("mse_loss: empty dataset");
  }
  const std::size_t rows = shape[0];
  const ad::Var total = ad::sum(ad::square(ad::sub(prediction, target)));
  if (reduction == LossReduction::Sum) return total;
  return ad::scale(total, 1.0 / static_cast<double>(rows));
}

DataVars data_leaves(ad::Graph& graph, const Dataset& data) {
  const std::size_t n = data.size();
  return DataVars{graph.leaf(ad::Tensor(ad::Shape{n, 1}, data.x)),
                  graph.leaf(ad::Tensor(ad::Shape{n, 1}, data.y))};
}

ad::Var mse_loss(const MlpArch& arch, ad::Var params, const DataVars& data,
                 LossReduction reduction) {
  return mse_loss(forward(arch, params, data.x), data.y, reduction);
}

NonFiniteLossError::NonFiniteLossError(std::size_t step, double value)
    : std::runtime_error("non-finite loss " + std::to_string(value) + " at inner step " +
                         std::to_string(step)),
      step_(step),
      value_(value) {}

ad::Var unrolled_descent(ad::Var init, const std::function<ad::Var(ad::Var)>& loss,
                         double alpha, std::size_t steps, bool first_order) {
  ad::Var theta = init;
  for (std::size_t step = 0; step < steps; ++step) {
    const ad::Var l = loss(theta);
    const double value = l.value().item();
    if (!std::isfinite(value)) throw NonFiniteLossError(step, value);
    const ad::Var wrt[] = {theta};
    ad::Var g = l.graph().grad(l, wrt).front();
    if (first_order) g = ad::stop_gradient(g);
    theta = ad::sub(theta, ad::scale(g, alpha));
  }
  return theta;
}

ad::Var inner_adapt(const MlpArch& arch, ad::Var init, const DataVars& support,
                    const InnerLoopOptions& options) {
  if (options.steps == 0) throw std::invalid_argument("inner_adapt: steps must be >= 1");
  if (!(options.alpha >= 0.0)) throw std::invalid_argument("inner_adapt: alpha must be >= 0");
  return unrolled_descent(
      init,
      [&](ad::Var theta) { return mse_loss(arch, theta, support, options.reduction); },
      options.alpha, options.steps, options.first_order);
}

}  // namespace hsml
