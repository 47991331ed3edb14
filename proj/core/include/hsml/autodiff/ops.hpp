// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Primitive operations. Every op has a derivative written in terms of these
// same ops, so backward passes stay differentiable.
//
// Broadcasting is limited to bias_add (row vector onto every row). All other
// shape mismatches raise ShapeError.

#pragma once

#include <span>
#include <vector>

#include "hsml/autodiff/graph.hpp"

namespace hsml::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var neg(Var a);

/// op(a) * op(b) for rank-2 operands, op = transpose when the flag is set.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);

/// Concatenation of rank-1 or rank-2 tensors along `axis`.
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);

Var sum(Var a);           // all elements -> scalar
Var mean(Var a);          // all elements -> scalar
Var sum_rows(Var a);      // [n, d] -> [d]
Var sum_last(Var a);      // [n, d] -> [n]
Var max_rows(Var a);      // [n, d] -> [d]; first maximum receives the gradient

Var broadcast_scalar(Var a, Shape shape);
Var repeat_rows(Var a, std::size_t n);  // [d] -> [n, d]
Var repeat_cols(Var a, std::size_t m);  // [n] -> [n, m]

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
/// Heaviside step (1 where a > 0). Treated as piecewise constant.
Var step(Var a);
Var exp(Var a);
Var log(Var a);
Var reciprocal(Var a);
Var square(Var a);

/// a: [n, d] or [d]; b: [d].
Var bias_add(Var a, Var b);
/// Softmax over the last axis of a rank-1 or rank-2 tensor.
Var softmax(Var a);
/// out[i, j] = ||a_i - b_j||^2 for a: [n, d], b: [m, d].
Var sq_dist(Var a, Var b);
/// Same value, no gradient flow.
Var stop_gradient(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace hsml::ad
