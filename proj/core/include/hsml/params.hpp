// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hsml/autodiff/graph.hpp"
#include "hsml/autodiff/tensor.hpp"

namespace hsml {

/// Named learnable tensors. Ordered by name, which fixes iteration order for
/// gradient accumulation and serialization.
using ParamSet = std::map<std::string, ad::Tensor>;

/// Graph leaves for a ParamSet, keyed by the same names.
class VarMap {
 public:
  VarMap() = default;

  /// Leaves share the tensors in `params` without copying; `params` must
  /// outlive the graph.
  static VarMap bind(ad::Graph& graph, const ParamSet& params);

  ad::Var at(std::string_view name) const;
  bool contains(std::string_view name) const { return vars_.find(name) != vars_.end(); }
  void insert(std::string name, ad::Var var) { vars_.insert_or_assign(std::move(name), var); }

  const std::map<std::string, ad::Var, std::less<>>& entries() const noexcept { return vars_; }
  std::vector<ad::Var> leaves() const;

 private:
  std::map<std::string, ad::Var, std::less<>> vars_;
};

ParamSet zeros_like(const ParamSet& params);
std::size_t parameter_count(const ParamSet& params);
double global_norm(const ParamSet& params);
bool all_finite(const ParamSet& params);

}  // namespace hsml
