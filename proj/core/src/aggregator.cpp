// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hsml/autodiff/ops.hpp"

namespace hsml {

std::string_view aggregator_name(AggregatorKind k) noexcept {
  return k == AggregatorKind::Recurrent ? "raa" : "paa";
}

AggregatorKind parse_aggregator(std::string_view name) {
  if (name == "raa") return AggregatorKind::Recurrent;
  if (name == "paa") return AggregatorKind::Pooling;
  throw std::invalid_argument("unknown aggregator '" + std::string(name) + "'");
}

std::string_view pool_name(PoolMode p) noexcept { return p == PoolMode::Mean ? "mean" : "max"; }

PoolMode parse_pool(std::string_view name) {
  if (name == "mean") return PoolMode::Mean;
  if (name == "max") return PoolMode::Max;
  throw std::invalid_argument("unknown pooling mode '" + std::string(name) + "'");
}

namespace {

ad::Tensor glorot(Rng& rng, std::size_t in, std::size_t out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  ad::Tensor w(ad::Shape{in, out});
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  return w;
}

void add_dense(ParamSet& params, Rng& rng, const std::string& prefix, std::size_t in,
               std::size_t out) {
  params[prefix + ".W"] = glorot(rng, in, out);
  params[prefix + ".b"] = ad::Tensor(ad::Shape{out}, 0.0);
}

void add_gru(ParamSet& params, Rng& rng, const std::string& prefix, std::size_t in,
             std::size_t hidden) {
  for (const char* gate : {"z", "r", "n"}) {
    params[prefix + ".W" + gate] = glorot(rng, in, hidden);
    params[prefix + ".U" + gate] = glorot(rng, hidden, hidden);
    params[prefix + ".b" + gate] = ad::Tensor(ad::Shape{hidden}, 0.0);
  }
}

ad::Var dense(const VarMap& vars, const std::string& prefix, ad::Var x) {
  return ad::bias_add(ad::matmul(x, vars.at(prefix + ".W")), vars.at(prefix + ".b"));
}

// h' = n + z * (h - n), z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br),
// n = tanh(x Wn + (r * h) Un + bn).
ad::Var gru_step(const VarMap& vars, const std::string& prefix, ad::Var x, ad::Var h) {
  auto gate_input = [&](const char* gate, ad::Var state) {
    const std::string g(gate);
    return ad::bias_add(ad::add(ad::matmul(x, vars.at(prefix + ".W" + g)),
                                ad::matmul(state, vars.at(prefix + ".U" + g))),
                        vars.at(prefix + ".b" + g));
  };
  const ad::Var z = ad::sigmoid(gate_input("z", h));
  const ad::Var r = ad::sigmoid(gate_input("r", h));
  const ad::Var n = ad::tanh(gate_input("n", ad::mul(r, h)));
  return ad::add(n, ad::mul(z, ad::sub(h, n)));
}

ad::Var row(ad::Var m, std::size_t i) { return ad::slice(m, 0, i, i + 1); }

ad::Var sq_norm(ad::Var diff) { return ad::sum(ad::square(diff)); }

}  // namespace

void init_aggregator(const AggregatorConfig& config, Rng& rng, ParamSet& params) {
  const std::size_t m = config.embed_dim;
  const std::size_t d = config.repr_dim;
  add_dense(params, rng, "agg.pre", 2, m);
  if (config.kind == AggregatorKind::Pooling) {
    add_dense(params, rng, "agg.paa.enc1", m, d);
    add_dense(params, rng, "agg.paa.enc2", d, d);
    add_dense(params, rng, "agg.paa.dec1", d, d);
    add_dense(params, rng, "agg.paa.dec2", d, m);
  } else {
    add_gru(params, rng, "agg.raa.enc", m, d);
    add_gru(params, rng, "agg.raa.dec", m, d);
    add_dense(params, rng, "agg.raa.out", d, m);
  }
}

ad::Var pair_leaf(ad::Graph& graph, const Dataset& data) {
  const std::size_t n = data.size();
  ad::Tensor t(ad::Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    t[2 * i] = data.x[i];
    t[2 * i + 1] = data.y[i];
  }
  return graph.leaf(std::move(t));
}

ad::Var pre_embed(const VarMap& vars, ad::Var pairs) {
  return ad::relu(dense(vars, "agg.pre", pairs));
}

Encoding paa_encode(const AggregatorConfig& config, const VarMap& vars, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("paa_encode: empty dataset");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data.x[a] != data.x[b]) return data.x[a] < data.x[b];
    return data.y[a] < data.y[b];
  });
  Dataset canonical;
  for (std::size_t i : order) {
    canonical.x.push_back(data.x[i]);
    canonical.y.push_back(data.y[i]);
  }

  ad::Graph& graph = vars.at("agg.pre.W").graph();
  const ad::Var features = pre_embed(vars, pair_leaf(graph, canonical));
  const ad::Var per_example =
      dense(vars, "agg.paa.enc2", ad::relu(dense(vars, "agg.paa.enc1", features)));
  ad::Var pooled = config.pool == PoolMode::Mean
                       ? ad::scale(ad::sum_rows(per_example), 1.0 / static_cast<double>(n))
                       : ad::max_rows(per_example);
  const ad::Var decoded =
      dense(vars, "agg.paa.dec2", ad::relu(dense(vars, "agg.paa.dec1", per_example)));
  const ad::Var recon = sq_norm(ad::sub(decoded, features));
  return Encoding{ad::reshape(pooled, {1, config.repr_dim}), recon};
}

Encoding raa_encode(const AggregatorConfig& config, const VarMap& vars, const Dataset& data,
                    std::span<const std::size_t> permutation) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("raa_encode: empty dataset");
  if (permutation.size() != n) {
    throw std::invalid_argument("raa_encode: permutation of length " +
                                std::to_string(permutation.size()) + " for " +
                                std::to_string(n) + " examples");
  }
  std::vector<char> seen(n, 0);
  for (std::size_t i : permutation) {
    if (i >= n || seen[i]) throw std::invalid_argument("raa_encode: not a permutation");
    seen[i] = 1;
  }

  ad::Graph& graph = vars.at("agg.pre.W").graph();
  const std::size_t d = config.repr_dim;
  const std::size_t m = config.embed_dim;
  const ad::Var features = pre_embed(vars, pair_leaf(graph, data));

  std::vector<ad::Var> inputs;
  inputs.reserve(n);
  for (std::size_t i : permutation) inputs.push_back(row(features, i));

  ad::Var state = graph.zeros({1, d});
  std::vector<ad::Var> states;
  states.reserve(n);
  for (const ad::Var& x : inputs) {
    state = gru_step(vars, "agg.raa.enc", x, state);
    states.push_back(state);
  }
  const ad::Var representation =
      ad::reshape(ad::scale(ad::sum_rows(ad::concat(states, 0)), 1.0 / static_cast<double>(n)),
                  {1, d});

  ad::Var recon;
  ad::Var feedback = graph.zeros({1, m});
  ad::Var dec_state = states.back();
  for (std::size_t j = n; j-- > 0;) {
    dec_state = gru_step(vars, "agg.raa.dec", feedback, dec_state);
    const ad::Var reconstruction = dense(vars, "agg.raa.out", dec_state);
    const ad::Var err = sq_norm(ad::sub(reconstruction, inputs[j]));
    recon = recon.valid() ? ad::add(recon, err) : err;
    feedback = reconstruction;
  }
  return Encoding{representation, recon};
}

Encoding encode(const AggregatorConfig& config, const VarMap& vars, const Dataset& data,
                std::span<const std::vector<std::size_t>> permutations) {
  if (config.kind == AggregatorKind::Pooling) return paa_encode(config, vars, data);
  if (permutations.empty()) throw std::invalid_argument("encode: no permutation supplied");
  if (permutations.size() == 1) return raa_encode(config, vars, data, permutations.front());
  std::vector<ad::Var> reps;
  ad::Var recon;
  for (const auto& perm : permutations) {
    Encoding e = raa_encode(config, vars, data, perm);
    reps.push_back(e.representation);
    recon = recon.valid() ? ad::add(recon, e.recon_loss) : e.recon_loss;
  }
  const double inv = 1.0 / static_cast<double>(permutations.size());
  const ad::Var mean_rep =
      ad::reshape(ad::scale(ad::sum_rows(ad::concat(reps, 0)), inv), {1, config.repr_dim});
  return Encoding{mean_rep, ad::scale(recon, inv)};
}

}  // namespace hsml
