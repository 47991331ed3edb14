// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the test binaries: finite differences and tolerant
// comparison.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "hsml/autodiff/tensor.hpp"

namespace hsml::testing {

/// |a - b| <= max(abs_floor, rel * max(|a|, |b|)).
inline bool close(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

/// Central difference of f with respect to element i of x.
inline double central_difference(const std::function<double(const ad::Tensor&)>& f,
                                 const ad::Tensor& x, std::size_t i, double h = 1e-5) {
  ad::Tensor plus = x;
  ad::Tensor minus = x;
  plus[i] += h;
  minus[i] -= h;
  return (f(plus) - f(minus)) / (2.0 * h);
}

}  // namespace hsml::testing
