// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a flat JSON object whose keys are also the CLI flag
// names. Unknown keys are errors, and every problem in a file is reported in
// one ConfigError.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsml/trainer.hpp"

namespace hsml::harness {

struct RunConfig {
  TrainerConfig trainer;
  std::string out_dir = "runs/default";
  std::size_t checkpoint_every = 1000;  // 0 = final checkpoint only
  std::size_t eval_every = 0;           // 0 = no periodic evaluation
  std::size_t eval_tasks = 1000;
  bool export_analysis = false;         // run export-analysis after training
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Every recognised key, in schema order.
const std::vector<std::string>& config_keys();

/// One-line description of `key` for help output.
std::string config_key_help(const std::string& key);

nlohmann::json to_json(const RunConfig& config);

/// Overwrites the fields named in `overrides`, then validates the result.
/// Throws ConfigError listing every bad key and every violated constraint.
void apply_overrides(RunConfig& config, const nlohmann::json& overrides);

/// Defaults overlaid with the file at `path`.
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& config);

/// Parses a flag value: JSON when it parses (numbers, booleans, arrays),
/// otherwise the raw string.
nlohmann::json parse_flag_value(const std::string& text);

}  // namespace hsml::harness
