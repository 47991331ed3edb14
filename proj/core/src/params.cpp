// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/params.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace hsml {

VarMap VarMap::bind(ad::Graph& graph, const ParamSet& params) {
  VarMap vars;
  for (const auto& [name, tensor] : params) {
    // Non-owning alias: the graph never outlives the parameter store.
    std::shared_ptr<const ad::Tensor> view(std::shared_ptr<const void>{}, &tensor);
    vars.vars_.emplace(name, graph.leaf(std::move(view)));
  }
  return vars;
}

ad::Var VarMap::at(std::string_view name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) {
    throw std::out_of_range("parameter '" + std::string(name) + "' is not bound");
  }
  return it->second;
}

std::vector<ad::Var> VarMap::leaves() const {
  std::vector<ad::Var> out;
  out.reserve(vars_.size());
  for (const auto& [name, var] : vars_) out.push_back(var);
  return out;
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  for (const auto& [name, tensor] : params) out.emplace(name, ad::Tensor(tensor.shape(), 0.0));
  return out;
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& [name, tensor] : params) n += tensor.size();
  return n;
}

double global_norm(const ParamSet& params) {
  double s = 0.0;
  for (const auto& [name, tensor] : params) {
    for (double v : tensor.data()) s += v * v;
  }
  return std::sqrt(s);
}

bool all_finite(const ParamSet& params) {
  for (const auto& [name, tensor] : params) {
    if (!tensor.all_finite()) return false;
  }
  return true;
}

}  // namespace hsml
