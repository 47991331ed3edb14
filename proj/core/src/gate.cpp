// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/gate.hpp"

#include <vector>

#include "hsml/autodiff/ops.hpp"

namespace hsml {

void init_gate(std::size_t repr_dim, std::size_t param_count, Rng& rng, ParamSet& params,
               double weight_std) {
  ad::Tensor w(ad::Shape{2 * repr_dim, param_count});
  for (double& v : w.values()) v = rng.normal(0.0, weight_std);
  params[kGateWeight] = std::move(w);
  params[kGateBias] = ad::Tensor(ad::Shape{param_count}, 0.0);
}

ad::Var gate_forward(ad::Var g, ad::Var h, ad::Var weight, ad::Var bias) {
  if (g.shape() != h.shape()) {
    throw ad::ShapeError("gate_forward: task representation " + ad::shape_string(g.shape()) +
                         " and cluster representation " + ad::shape_string(h.shape()) +
                         " differ");
  }
  const std::vector<ad::Var> parts{g, h};
  const ad::Var joint = ad::concat(parts, 1);
  const ad::Var logits = ad::bias_add(ad::matmul(joint, weight), bias);
  return ad::reshape(ad::sigmoid(logits), {bias.shape().at(0)});
}

ad::Var apply_gate(ad::Var theta0, ad::Var gate) { return ad::mul(theta0, gate); }

}  // namespace hsml
