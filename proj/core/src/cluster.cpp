// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/cluster.hpp"

#include <cmath>
#include <stdexcept>

#include "hsml/autodiff/ops.hpp"

namespace hsml {

void ClusterConfig::validate() const {
  if (sizes.empty()) throw std::invalid_argument("cluster: no levels");
  for (std::size_t k : sizes) {
    if (k == 0) throw std::invalid_argument("cluster: level with zero clusters");
  }
  if (sizes.back() != 1) throw std::invalid_argument("cluster: top level must have one cluster");
  if (!(sigma > 0.0)) throw std::invalid_argument("cluster: sigma must be > 0");
  if (dim == 0) throw std::invalid_argument("cluster: zero representation size");
}

std::string center_name(std::size_t level) {
  return "cluster.l" + std::to_string(level) + ".centers";
}
std::string transform_weight_name(std::size_t level, std::size_t k) {
  return "cluster.l" + std::to_string(level) + ".W" + std::to_string(k);
}
std::string transform_bias_name(std::size_t level, std::size_t k) {
  return "cluster.l" + std::to_string(level) + ".b" + std::to_string(k);
}
std::string sigma_name(std::size_t level) {
  return "cluster.l" + std::to_string(level) + ".sigma";
}

namespace {

void add_center_row(ad::Tensor& centers, Rng& rng, double stddev) {
  const std::size_t d = centers.dim(1);
  auto values = centers.values();
  for (std::size_t i = 0; i < d; ++i) values.push_back(rng.normal(0.0, stddev));
  centers = ad::Tensor(ad::Shape{centers.dim(0) + 1, d}, std::move(values));
}

void add_transform(ParamSet& params, Rng& rng, std::size_t level, std::size_t k,
                   std::size_t d) {
  const double limit = std::sqrt(6.0 / static_cast<double>(2 * d));
  ad::Tensor w(ad::Shape{d, d});
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  params[transform_weight_name(level, k)] = std::move(w);
  params[transform_bias_name(level, k)] = ad::Tensor(ad::Shape{d}, 0.0);
}

}  // namespace

void init_cluster(const ClusterConfig& config, Rng& rng, ParamSet& params) {
  config.validate();
  const std::size_t d = config.dim;
  for (std::size_t level = 0; level < config.sizes.size(); ++level) {
    const std::size_t k_next = config.sizes[level];
    ad::Tensor centers(ad::Shape{0, d});
    for (std::size_t k = 0; k < k_next; ++k) add_center_row(centers, rng, config.center_std);
    params[center_name(level)] = std::move(centers);
    for (std::size_t k = 0; k < k_next; ++k) add_transform(params, rng, level, k, d);
    if (config.learnable_sigma) params[sigma_name(level)] = ad::Tensor::scalar(config.sigma);
  }
}

ad::Var assign(ad::Var h, ad::Var centers, ad::Var sigma) {
  const ad::Var dist = ad::sq_dist(h, centers);
  // -1 / (2 sigma^2), broadcast over the distance matrix.
  const ad::Var factor = ad::scale(ad::reciprocal(ad::square(sigma)), -0.5);
  return ad::softmax(ad::mul(dist, ad::broadcast_scalar(factor, dist.shape())));
}

ad::Var update(ad::Var h, ad::Var p, const std::vector<ad::Var>& weights,
               const std::vector<ad::Var>& biases) {
  const std::size_t k_next = p.shape().at(1);
  if (weights.size() != k_next || biases.size() != k_next) {
    throw ad::ShapeError("update: " + std::to_string(weights.size()) + " transforms for " +
                         std::to_string(k_next) + " clusters");
  }
  std::vector<ad::Var> rows;
  rows.reserve(k_next);
  for (std::size_t k = 0; k < k_next; ++k) {
    const ad::Var transformed = ad::tanh(ad::bias_add(ad::matmul(h, weights[k], false, true), biases[k]));
    const ad::Var weight = ad::slice(p, 1, k, k + 1);  // [n, 1]
    rows.push_back(ad::matmul(weight, transformed, true, false));
  }
  return ad::concat(rows, 0);
}

ClusterOutput cluster_forward(const ClusterConfig& config, const VarMap& vars, ad::Var g) {
  ClusterOutput out;
  ad::Graph& graph = g.graph();
  ad::Var h = g;
  for (std::size_t level = 0; level < config.sizes.size(); ++level) {
    const std::size_t k_next = config.sizes[level];
    const ad::Var sigma = config.learnable_sigma ? vars.at(sigma_name(level))
                                                 : graph.constant(config.sigma);
    const ad::Var p = assign(h, vars.at(center_name(level)), sigma);
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
    for (std::size_t k = 0; k < k_next; ++k) {
      weights.push_back(vars.at(transform_weight_name(level, k)));
      biases.push_back(vars.at(transform_bias_name(level, k)));
    }
    out.assignments.push_back(p);
    h = update(h, p, weights, biases);
  }
  out.representation = h;
  return out;
}

void expand(ClusterConfig& config, Rng& rng, ParamSet& params) {
  ad::Tensor& centers = params.at(center_name(0));
  const std::size_t k = centers.dim(0);
  add_center_row(centers, rng, config.center_std);
  add_transform(params, rng, 0, k, config.dim);
  config.sizes.front() += 1;
}

}  // namespace hsml
