// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "hsml/params.hpp"

namespace hsml {

struct AdamState {
  ParamSet first_moment;
  ParamSet second_moment;
  std::size_t step = 0;
};

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamOptions& options);

/// params <- params - learning_rate * grads.
void sgd_step(ParamSet& params, const ParamSet& grads, double learning_rate);

/// Makes every tensor of `moments` match the shape of the same-named tensor in
/// `params`: missing entries become zeros, grown leading dimensions are padded
/// with zero rows. Existing values are kept.
void conform_moments(ParamSet& moments, const ParamSet& params);

/// Scales grads so their global norm is at most max_norm; returns the norm
/// before clipping. max_norm <= 0 disables clipping.
double clip_global_norm(ParamSet& grads, double max_norm);

}  // namespace hsml
