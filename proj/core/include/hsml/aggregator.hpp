// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task representation from a support set.
//
// Every example (x, y) is first embedded by one dense layer with ReLU,
// F(x, y) in R^m. Two aggregators then produce the task vector g in R^d and a
// reconstruction loss:
//
//  * pooling (PAA): g_j = enc(F_j) with a two-layer ReLU encoder, g = pool_j g_j,
//    reconstruction sum_j ||dec(g_j) - F_j||^2 with a two-layer ReLU decoder.
//  * recurrent (RAA): a GRU encoder reads F_j in a given order; g is the mean
//    of its hidden states. A GRU decoder starts from the last encoder state
//    and emits reconstructions in reverse order, each fed back as the next
//    decoder input.
//
// Parameter names (all under "agg."):
//   pre.W [2, m], pre.b [m]
//   paa.enc1.W [m, d] .b, paa.enc2.W [d, d] .b, paa.dec1.W [d, d] .b, paa.dec2.W [d, m] .b
//   raa.enc.{Wz,Wr,Wn} [m, d], raa.enc.{Uz,Ur,Un} [d, d], raa.enc.{bz,br,bn} [d]
//   raa.dec.* likewise (input size m), raa.out.W [d, m], raa.out.b [m]

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "hsml/autodiff/graph.hpp"
#include "hsml/params.hpp"
#include "hsml/rng.hpp"
#include "hsml/taskgen.hpp"

namespace hsml {

enum class AggregatorKind { Recurrent, Pooling };
enum class PoolMode { Mean, Max };

std::string_view aggregator_name(AggregatorKind k) noexcept;
AggregatorKind parse_aggregator(std::string_view name);
std::string_view pool_name(PoolMode p) noexcept;
PoolMode parse_pool(std::string_view name);

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::Recurrent;
  PoolMode pool = PoolMode::Mean;
  std::size_t embed_dim = 40;  // m
  std::size_t repr_dim = 40;   // d
};

/// Adds the aggregator's parameters to `params` (Glorot-uniform weights, zero
/// biases).
void init_aggregator(const AggregatorConfig& config, Rng& rng, ParamSet& params);

struct Encoding {
  ad::Var representation;  // [1, d]
  ad::Var recon_loss;      // scalar
};

/// Support set as a [n, 2] leaf of (x, y) rows.
ad::Var pair_leaf(ad::Graph& graph, const Dataset& data);

/// F(x, y): [n, 2] -> [n, m].
ad::Var pre_embed(const VarMap& vars, ad::Var pairs);

/// Pooling aggregator. Rows are first put in a canonical order (sorted by
/// (x, y)), which makes the result bit-identical under any permutation.
Encoding paa_encode(const AggregatorConfig& config, const VarMap& vars, const Dataset& data);

/// Recurrent aggregator reading the examples in `permutation` order.
/// Throws std::invalid_argument unless `permutation` is a bijection on
/// 0..n-1.
Encoding raa_encode(const AggregatorConfig& config, const VarMap& vars, const Dataset& data,
                    std::span<const std::size_t> permutation);

/// Dispatches on config.kind. For the recurrent aggregator, representation
/// and loss are averaged over `permutations` (at least one); the pooling
/// aggregator ignores them.
Encoding encode(const AggregatorConfig& config, const VarMap& vars, const Dataset& data,
                std::span<const std::vector<std::size_t>> permutations);

}  // namespace hsml
