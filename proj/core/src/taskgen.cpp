// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/taskgen.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hsml {

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::Sinusoid: return "sinusoid";
    case Family::Line: return "line";
    case Family::Cubic: return "cubic";
    case Family::Quadratic: return "quadratic";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown task family '" + std::string(name) + "'");
}

std::vector<CoefficientRange> coefficient_ranges(Family family) {
  switch (family) {
    case Family::Sinusoid:
      return {{"A", 0.1, 5.0}, {"w", 0.8, 1.2}, {"b", 0.0, 2.0 * std::numbers::pi}};
    case Family::Line:
      return {{"A", -3.0, 3.0}, {"b", -3.0, 3.0}};
    case Family::Cubic:
      return {{"A", -0.1, 0.1}, {"b", -0.2, 0.2}, {"c", -2.0, 2.0}, {"d", -3.0, 3.0}};
    case Family::Quadratic:
      return {{"A", -0.2, 0.2}, {"b", -2.0, 2.0}, {"c", -3.0, 3.0}};
  }
  return {};
}

double evaluate_truth(Family family, const std::vector<double>& c, double x) {
  if (c.size() != coefficient_ranges(family).size()) {
    throw std::invalid_argument("evaluate_truth: " + std::to_string(c.size()) +
                                " coefficients for family " + std::string(family_name(family)));
  }
  switch (family) {
    case Family::Sinusoid: return c[0] * std::sin(c[1] * x) + c[2];
    case Family::Line: return c[0] * x + c[1];
    case Family::Cubic: return c[0] * x * x * x + c[1] * x * x + c[2] * x + c[3];
    case Family::Quadratic: return c[0] * x * x + c[1] * x + c[2];
  }
  return 0.0;
}

namespace {

Dataset draw_points(Rng& rng, Family family, const std::vector<double>& coefficients,
                    std::size_t n) {
  Dataset d;
  d.x.reserve(n);
  d.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(kInputLo, kInputHi);
    d.x.push_back(x);
    d.y.push_back(evaluate_truth(family, coefficients, x));
  }
  return d;
}

}  // namespace

Task make_task(Rng& rng, Family family, std::vector<double> coefficients, std::size_t n_support,
               std::size_t n_query) {
  if (n_support == 0) throw std::invalid_argument("make_task: support set size must be >= 1");
  Task task;
  task.family = family;
  task.coefficients = std::move(coefficients);
  task.support = draw_points(rng, family, task.coefficients, n_support);
  task.query = draw_points(rng, family, task.coefficients, n_query);
  return task;
}

Task sample_task_of_family(Rng& rng, Family family, std::size_t n_support, std::size_t n_query) {
  std::vector<double> coefficients;
  for (const CoefficientRange& r : coefficient_ranges(family)) {
    coefficients.push_back(rng.uniform(r.lo, r.hi));
  }
  return make_task(rng, family, std::move(coefficients), n_support, n_query);
}

Task sample_task(Rng& rng, const FamilySet& active, std::size_t n_support, std::size_t n_query) {
  if (active.empty()) throw std::invalid_argument("sample_task: no active task families");
  auto it = active.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(active.size())));
  return sample_task_of_family(rng, *it, n_support, n_query);
}

StreamSchedule StreamSchedule::all_families() {
  return StreamSchedule{{StreamStage{0, FamilySet(kAllFamilies.begin(), kAllFamilies.end())}}};
}

void StreamSchedule::validate() const {
  if (stages.empty()) throw std::invalid_argument("schedule: no stages");
  if (stages.front().iteration != 0) {
    throw std::invalid_argument("schedule: first stage must start at iteration 0");
  }
  if (stages.front().families.empty()) {
    throw std::invalid_argument("schedule: first stage has no families");
  }
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (stages[i].iteration <= stages[i - 1].iteration) {
      throw std::invalid_argument("schedule: stage thresholds must strictly increase");
    }
  }
}

FamilySet active_families(const StreamSchedule& schedule, std::size_t iteration) {
  FamilySet active;
  for (const StreamStage& stage : schedule.stages) {
    if (stage.iteration <= iteration) active.insert(stage.families.begin(), stage.families.end());
  }
  return active;
}

nlohmann::json to_json(const Task& task) {
  nlohmann::json j;
  j["family"] = family_name(task.family);
  nlohmann::json coeffs = nlohmann::json::object();
  const auto ranges = coefficient_ranges(task.family);
  for (std::size_t i = 0; i < ranges.size(); ++i) coeffs[std::string(ranges[i].name)] = task.coefficients[i];
  j["coefficients"] = coeffs;
  auto points = [](const Dataset& d) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < d.size(); ++i) arr.push_back({d.x[i], d.y[i]});
    return arr;
  };
  j["support"] = points(task.support);
  j["query"] = points(task.query);
  return j;
}

nlohmann::json to_json(const StreamSchedule& schedule) {
  nlohmann::json arr = nlohmann::json::array();
  for (const StreamStage& stage : schedule.stages) {
    nlohmann::json fams = nlohmann::json::array();
    for (Family f : stage.families) fams.push_back(family_name(f));
    arr.push_back({{"iteration", stage.iteration}, {"families", fams}});
  }
  return arr;
}

StreamSchedule schedule_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("schedule: expected an array of stages");
  StreamSchedule schedule;
  for (const auto& stage : j) {
    StreamStage s;
    s.iteration = stage.at("iteration").get<std::size_t>();
    for (const auto& name : stage.at("families")) s.families.insert(parse_family(name.get<std::string>()));
    schedule.stages.push_back(std::move(s));
  }
  return schedule;
}

}  // namespace hsml
