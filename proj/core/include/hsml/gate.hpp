// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Cluster-specific parameter gate: o = sigmoid([g, h] W + b), one gate value
// per base-learner parameter, and the gated initialization theta0 * o.
//
// Parameter names: gate.W [2d, P], gate.b [P].

#pragma once

#include <cstddef>

#include "hsml/autodiff/graph.hpp"
#include "hsml/params.hpp"
#include "hsml/rng.hpp"

namespace hsml {

inline constexpr const char* kGateWeight = "gate.W";
inline constexpr const char* kGateBias = "gate.b";

/// W ~ N(0, weight_std^2), b = 0, so the initial gate is close to 0.5.
void init_gate(std::size_t repr_dim, std::size_t param_count, Rng& rng, ParamSet& params,
               double weight_std = 0.01);

/// g, h: [1, d] each -> o: [P].
ad::Var gate_forward(ad::Var g, ad::Var h, ad::Var weight, ad::Var bias);

/// theta0 * o elementwise. Throws ShapeError on a length mismatch.
ad::Var apply_gate(ad::Var theta0, ad::Var gate);

}  // namespace hsml
