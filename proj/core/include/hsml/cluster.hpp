// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable hierarchical soft clustering of task representations.
//
// Level sizes K^1..K^L sit above the root K^0 = 1 (the task vector itself)
// and must end with K^L = 1; the default is {4, 2, 1}. Transition l maps the
// K^l representations of level l to the K^{l+1} of level l+1:
//
//   p[a, k] = softmax_k( -||h_a - c_k||^2 / (2 sigma_l^2) )
//   h'_k    = sum_a p[a, k] * tanh(W_k h_a + b_k)
//
// Parameter names:
//   cluster.l<l>.centers [K^{l+1}, d]
//   cluster.l<l>.W<k>    [d, d]   (applied as h W^T)
//   cluster.l<l>.b<k>    [d]
//   cluster.l<l>.sigma   scalar, only when sigma is learnable

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hsml/autodiff/graph.hpp"
#include "hsml/params.hpp"
#include "hsml/rng.hpp"

namespace hsml {

struct ClusterConfig {
  std::vector<std::size_t> sizes{4, 2, 1};
  std::size_t dim = 40;
  double sigma = 1.0;
  bool learnable_sigma = false;
  double center_std = 0.1;

  /// Throws std::invalid_argument when sizes are empty, contain a zero, or
  /// do not end in 1, or when sigma <= 0.
  void validate() const;
};

std::string center_name(std::size_t level);
std::string transform_weight_name(std::size_t level, std::size_t k);
std::string transform_bias_name(std::size_t level, std::size_t k);
std::string sigma_name(std::size_t level);

/// Adds all clustering parameters to `params`. Centers ~ N(0, center_std^2);
/// transforms Glorot-uniform with zero bias.
void init_cluster(const ClusterConfig& config, Rng& rng, ParamSet& params);

/// Soft assignment of each row of h [n, d] to centers [K, d]: [n, K].
/// `sigma` is a scalar node.
ad::Var assign(ad::Var h, ad::Var centers, ad::Var sigma);

/// Transformed weighted average: h [n, d], p [n, K] -> [K, d].
ad::Var update(ad::Var h, ad::Var p, const std::vector<ad::Var>& weights,
               const std::vector<ad::Var>& biases);

struct ClusterOutput {
  ad::Var representation;            // h^L, [1, d]
  std::vector<ad::Var> assignments;  // per transition, [K^l, K^{l+1}]
};

ClusterOutput cluster_forward(const ClusterConfig& config, const VarMap& vars, ad::Var g);

/// Grows the first level by one cluster: one new center row plus its
/// transform, drawn from the same initializer as init_cluster. Existing
/// values are left untouched. Updates config.sizes.
void expand(ClusterConfig& config, Rng& rng, ParamSet& params);

}  // namespace hsml
