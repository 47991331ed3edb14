// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random scalar-valued composites of the differentiable primitives, for
// gradient checking. A program is a list of op codes applied to a running
// [3, 4] value; it can be rebuilt on fresh graphs with perturbed inputs.

#pragma once

#include <vector>

#include "hsml/autodiff/graph.hpp"
#include "hsml/autodiff/ops.hpp"
#include "hsml/rng.hpp"

namespace hsml::testing {

struct RandomProgram {
  std::vector<int> ops;
  int reducer = 0;
};

inline constexpr int kOpCount = 17;
inline constexpr int kReducerCount = 6;

struct RandomInputs {
  std::vector<ad::Tensor> tensors;  // a [3,4], b [3,4], v [4], m [4,2]
};

inline RandomInputs random_inputs(Rng& rng) {
  auto fill = [&](ad::Shape shape) {
    ad::Tensor t(shape, 0.0);
    for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  return {{fill({3, 4}), fill({3, 4}), fill({4}), fill({4, 2})}};
}

inline RandomProgram random_program(Rng& rng, std::size_t min_ops = 2, std::size_t max_ops = 7) {
  RandomProgram p;
  const std::size_t n = min_ops + rng.below(max_ops - min_ops + 1);
  for (std::size_t i = 0; i < n; ++i) p.ops.push_back(static_cast<int>(rng.below(kOpCount)));
  p.reducer = static_cast<int>(rng.below(kReducerCount));
  return p;
}

/// Builds the program on `leaves` = {a, b, v, m}. Every op keeps values in a
/// smooth region (no ReLU kinks, logs of positive arguments).
inline ad::Var build(const RandomProgram& p, const std::vector<ad::Var>& leaves) {
  using namespace ad;
  const Var b = leaves[1];
  const Var v = leaves[2];
  const Var m = leaves[3];
  Graph& g = b.graph();
  Var x = leaves[0];
  for (int op : p.ops) {
    switch (op) {
      case 0: x = tanh(x); break;
      case 1: x = sigmoid(x); break;
      case 2: x = scale(square(x), 0.5); break;
      case 3: x = neg(x); break;
      case 4: x = exp(scale(x, 0.3)); break;
      case 5: x = log(add(square(x), g.leaf(Tensor(x.shape(), 1.0)))); break;
      case 6: x = reciprocal(add(square(x), g.leaf(Tensor(x.shape(), 1.0)))); break;
      case 7: x = softmax(x); break;
      case 8: x = add(x, b); break;
      case 9: x = sub(x, b); break;
      case 10: x = mul(x, b); break;
      case 11: x = bias_add(x, v); break;
      case 12: x = matmul(matmul(x, m), m, false, true); break;
      case 13: {
        const std::vector<Var> parts{b, x};
        x = slice(concat(parts, 0), 0, 2, 5);
        break;
      }
      case 14: {
        const std::vector<Var> parts{x, b};
        x = slice(concat(parts, 1), 1, 2, 6);
        break;
      }
      case 15: x = matmul(x, matmul(b, b, true, false)); x = scale(x, 0.25); break;
      case 16: x = mul(x, repeat_rows(v, 3)); break;
      default: break;
    }
  }
  switch (p.reducer) {
    case 0: return sum(x);
    case 1: return mean(square(x));
    case 2: return sum(scale(sq_dist(x, b), 0.1));
    case 3: return sum(mul(sum_rows(x), v));
    case 4: return sum(tanh(sum_last(x)));
    default: return sum(mul(reshape(x, {12}), reshape(b, {12})));
  }
}

}  // namespace hsml::testing
