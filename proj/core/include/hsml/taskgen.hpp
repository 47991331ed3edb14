// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy-regression task families and episode sampling.

#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsml/rng.hpp"

namespace hsml {

enum class Family { Sinusoid, Line, Cubic, Quadratic };

inline constexpr std::array<Family, 4> kAllFamilies = {Family::Sinusoid, Family::Line,
                                                       Family::Cubic, Family::Quadratic};

using FamilySet = std::set<Family>;

std::string_view family_name(Family family) noexcept;
/// Throws std::invalid_argument for unknown names.
Family parse_family(std::string_view name);

/// Closed sampling range of one coefficient.
struct CoefficientRange {
  std::string_view name;
  double lo;
  double hi;
};

/// Coefficient ranges of a family, in the order coefficients are stored and
/// sampled:
///   sinusoid  y = A sin(w x) + b          (A, w, b)
///   line      y = A x + b                 (A, b)
///   cubic     y = A x^3 + b x^2 + c x + d (A, b, c, d)
///   quadratic y = A x^2 + b x + c         (A, b, c)
std::vector<CoefficientRange> coefficient_ranges(Family family);

inline constexpr double kInputLo = -5.0;
inline constexpr double kInputHi = 5.0;

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const noexcept { return x.size(); }
  bool empty() const noexcept { return x.empty(); }
};

struct Task {
  Family family = Family::Sinusoid;
  std::vector<double> coefficients;
  Dataset support;
  Dataset query;
};

double evaluate_truth(Family family, const std::vector<double>& coefficients, double x);
inline double evaluate_truth(const Task& task, double x) {
  return evaluate_truth(task.family, task.coefficients, x);
}

/// Family drawn uniformly from `active` (enumeration order), then
/// coefficients, then support inputs, then query inputs.
Task sample_task(Rng& rng, const FamilySet& active, std::size_t n_support, std::size_t n_query);
Task sample_task_of_family(Rng& rng, Family family, std::size_t n_support, std::size_t n_query);
/// Task with given coefficients and freshly drawn inputs.
Task make_task(Rng& rng, Family family, std::vector<double> coefficients, std::size_t n_support,
               std::size_t n_query);

/// Stages of a continual stream: from `iteration` on, `families` are added.
struct StreamStage {
  std::size_t iteration = 0;
  FamilySet families;
};

struct StreamSchedule {
  std::vector<StreamStage> stages;

  /// All four families from iteration 0.
  static StreamSchedule all_families();
  /// Throws std::invalid_argument unless thresholds strictly increase, the
  /// first stage starts at 0 and adds at least one family.
  void validate() const;
};

/// Union of the family sets of all stages whose threshold is <= iteration.
FamilySet active_families(const StreamSchedule& schedule, std::size_t iteration);

nlohmann::json to_json(const Task& task);
nlohmann::json to_json(const StreamSchedule& schedule);
StreamSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace hsml
