// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Base learner: a fully connected regressor whose parameters live in one flat
// vector, plus the differentiable inner-loop adaptation.

#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsml/autodiff/graph.hpp"
#include "hsml/rng.hpp"
#include "hsml/taskgen.hpp"

namespace hsml {

enum class Activation { Relu, Tanh };
enum class LossReduction { Mean, Sum };

std::string_view activation_name(Activation a) noexcept;
Activation parse_activation(std::string_view name);
std::string_view reduction_name(LossReduction r) noexcept;
LossReduction parse_reduction(std::string_view name);

/// Offsets of one dense layer inside the flat parameter vector.
struct LayerSlot {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;  // [in, out] row-major
  std::size_t bias_offset = 0;    // [out]
};

/// Layer widths, input first. Default 1 -> 40 -> 40 -> 1.
///
/// Packing order is layer-major, weights ([in, out], row-major) then bias,
/// so the default architecture has 1761 parameters.
struct MlpArch {
  std::vector<std::size_t> widths{1, 40, 40, 1};
  Activation hidden = Activation::Relu;

  std::vector<LayerSlot> layout() const;
  std::size_t param_count() const;
};

/// Truncated-normal weights (std `weight_std`, cut at two std), zero biases.
ad::Tensor init_params(const MlpArch& arch, Rng& rng, double weight_std = 0.01);

/// x: [n, in] -> [n, out]. Throws ShapeError on a wrong parameter length.
ad::Var forward(const MlpArch& arch, ad::Var params, ad::Var x);

/// Squared error of predictions against targets of the same shape, averaged
/// (Mean) or summed (Sum) over rows. Throws std::invalid_argument when empty.
ad::Var mse_loss(ad::Var prediction, ad::Var target, LossReduction reduction);

/// Dataset as graph leaves: inputs [n, 1] and targets [n, 1].
struct DataVars {
  ad::Var x;
  ad::Var y;
};
DataVars data_leaves(ad::Graph& graph, const Dataset& data);

ad::Var mse_loss(const MlpArch& arch, ad::Var params, const DataVars& data,
                 LossReduction reduction);

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t step, double value);
  std::size_t step() const noexcept { return step_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t step_;
  double value_;
};

struct InnerLoopOptions {
  double alpha = 0.001;
  std::size_t steps = 5;
  /// Detach inner gradients (first-order approximation).
  bool first_order = false;
  LossReduction reduction = LossReduction::Mean;
};

/// `steps` full-batch gradient steps theta <- theta - alpha * dloss/dtheta
/// starting from `init`. The result stays differentiable with respect to
/// `init` (and anything upstream of it) unless first_order is set.
ad::Var unrolled_descent(ad::Var init, const std::function<ad::Var(ad::Var)>& loss,
                         double alpha, std::size_t steps, bool first_order);

ad::Var inner_adapt(const MlpArch& arch, ad::Var init, const DataVars& support,
                    const InnerLoopOptions& options);

}  // namespace hsml
