// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hsml {

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamOptions& options) {
  conform_moments(state.first_moment, params);
  conform_moments(state.second_moment, params);
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (auto& [name, value] : params) {
    const ad::Tensor& g = grads.at(name);
    ad::Tensor& m = state.first_moment.at(name);
    ad::Tensor& v = state.second_moment.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

void sgd_step(ParamSet& params, const ParamSet& grads, double learning_rate) {
  for (auto& [name, value] : params) {
    const ad::Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate * g[i];
  }
}

void conform_moments(ParamSet& moments, const ParamSet& params) {
  for (const auto& [name, value] : params) {
    auto it = moments.find(name);
    if (it == moments.end()) {
      moments.emplace(name, ad::Tensor(value.shape(), 0.0));
      continue;
    }
    ad::Tensor& m = it->second;
    if (m.shape() == value.shape()) continue;
    const bool grown_rows = m.rank() == value.rank() && m.rank() >= 1 &&
                            m.size() <= value.size() &&
                            std::equal(m.shape().begin() + 1, m.shape().end(),
                                       value.shape().begin() + 1);
    if (!grown_rows) {
      throw std::invalid_argument("optimizer state for '" + name + "' has shape " +
                                  ad::shape_string(m.shape()) + ", parameter has " +
                                  ad::shape_string(value.shape()));
    }
    auto values = m.values();
    values.resize(value.size(), 0.0);
    m = ad::Tensor(value.shape(), std::move(values));
  }
}

double clip_global_norm(ParamSet& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& v : g.values()) v *= factor;
    }
  }
  return norm;
}

}  // namespace hsml
