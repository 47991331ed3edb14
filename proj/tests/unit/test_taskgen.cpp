// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hsml/taskgen.hpp"

using namespace hsml;

TEST_CASE("closed forms", "[taskgen]") {
  CHECK(evaluate_truth(Family::Line, {2.0, 1.0}, 3.0) == 7.0);
  CHECK(evaluate_truth(Family::Cubic, {0.0, 0.0, 1.0, 0.0}, 2.0) == 2.0);
  CHECK(std::abs(evaluate_truth(Family::Quadratic, {0.2, 0.0, -3.0}, 5.0) - 2.0) < 1e-12);
  CHECK(evaluate_truth(Family::Sinusoid, {2.0, 1.0, 0.5}, 0.0) == 0.5);
  CHECK_THROWS_AS(evaluate_truth(Family::Line, {1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("coefficient ranges", "[taskgen]") {
  const auto s = coefficient_ranges(Family::Sinusoid);
  REQUIRE(s.size() == 3);
  CHECK(s[0].lo == 0.1);
  CHECK(s[0].hi == 5.0);
  CHECK(s[1].lo == 0.8);
  CHECK(s[1].hi == 1.2);
  CHECK(s[2].hi == 2.0 * std::numbers::pi);
  CHECK(coefficient_ranges(Family::Line).size() == 2);
  CHECK(coefficient_ranges(Family::Cubic).size() == 4);
  CHECK(coefficient_ranges(Family::Quadratic).size() == 3);
  CHECK(coefficient_ranges(Family::Cubic)[0].hi == 0.1);
  CHECK(coefficient_ranges(Family::Quadratic)[1].lo == -2.0);
}

TEST_CASE("family names round-trip", "[taskgen]") {
  for (Family f : kAllFamilies) CHECK(parse_family(family_name(f)) == f);
  CHECK_THROWS_AS(parse_family("spline"), std::invalid_argument);
}

TEST_CASE("sampled tasks respect ranges and reproduce the truth", "[taskgen][property]") {
  Rng rng(21);
  const FamilySet all(kAllFamilies.begin(), kAllFamilies.end());
  for (int i = 0; i < 2000; ++i) {
    const Task t = sample_task(rng, all, 5, 10);
    const auto ranges = coefficient_ranges(t.family);
    REQUIRE(t.coefficients.size() == ranges.size());
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      CHECK((t.coefficients[k] >= ranges[k].lo && t.coefficients[k] <= ranges[k].hi));
    }
    REQUIRE(t.support.size() == 5);
    REQUIRE(t.query.size() == 10);
    for (std::size_t j = 0; j < t.support.size(); ++j) {
      CHECK((t.support.x[j] >= kInputLo && t.support.x[j] <= kInputHi));
      CHECK(t.support.y[j] == evaluate_truth(t, t.support.x[j]));
    }
    for (std::size_t j = 0; j < t.query.size(); ++j) CHECK(t.query.y[j] == evaluate_truth(t, t.query.x[j]));
  }
}

TEST_CASE("same seed gives the same task sequence", "[taskgen][property]") {
  Rng a(5);
  Rng b(5);
  const FamilySet all(kAllFamilies.begin(), kAllFamilies.end());
  for (int i = 0; i < 50; ++i) CHECK(to_json(sample_task(a, all, 5, 5)) == to_json(sample_task(b, all, 5, 5)));
}

TEST_CASE("families are chosen uniformly", "[taskgen][property]") {
  Rng rng(8);
  const FamilySet all(kAllFamilies.begin(), kAllFamilies.end());
  std::map<Family, int> counts;
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[sample_task(rng, all, 1, 0).family]++;
  for (Family f : kAllFamilies) CHECK(std::abs(counts[f] / double(n) - 0.25) < 0.01);
}

TEST_CASE("sampling errors", "[taskgen]") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_task(rng, {}, 5, 5), std::invalid_argument);
  CHECK_THROWS_AS(sample_task_of_family(rng, Family::Line, 0, 5), std::invalid_argument);
}

TEST_CASE("active families follow the stream schedule", "[taskgen]") {
  StreamSchedule s;
  s.stages = {{0, {Family::Sinusoid, Family::Line}}, {15000, {Family::Quadratic}}, {30000, {Family::Cubic}}};
  REQUIRE_NOTHROW(s.validate());
  CHECK(active_families(s, 0) == FamilySet{Family::Sinusoid, Family::Line});
  CHECK(active_families(s, 15000) == FamilySet{Family::Sinusoid, Family::Line, Family::Quadratic});
  CHECK(active_families(s, 29999) == FamilySet{Family::Sinusoid, Family::Line, Family::Quadratic});
  CHECK(active_families(s, 30000).size() == 4);
  CHECK(schedule_from_json(to_json(s)).stages.size() == 3);
  CHECK(active_families(schedule_from_json(to_json(s)), 30000) == active_families(s, 30000));
}

TEST_CASE("malformed schedules are rejected", "[taskgen]") {
  StreamSchedule late;
  late.stages = {{5, {Family::Line}}};
  CHECK_THROWS_AS(late.validate(), std::invalid_argument);
  StreamSchedule unordered;
  unordered.stages = {{0, {Family::Line}}, {10, {Family::Cubic}}, {10, {Family::Quadratic}}};
  CHECK_THROWS_AS(unordered.validate(), std::invalid_argument);
  StreamSchedule empty_first;
  empty_first.stages = {{0, {}}};
  CHECK_THROWS_AS(empty_first.validate(), std::invalid_argument);
  CHECK_THROWS_AS(StreamSchedule{}.validate(), std::invalid_argument);
}
