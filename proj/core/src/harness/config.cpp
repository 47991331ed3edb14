// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/harness/config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>

namespace hsml::harness {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const std::string& line : lines) out += "\n  " + line;
  return out;
}

double as_double(const json& j) {
  if (!j.is_number()) throw std::invalid_argument("expected a number, got " + j.dump());
  return j.get<double>();
}

std::uint64_t as_u64(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    throw std::invalid_argument("expected a non-negative integer, got " + j.dump());
  }
  throw std::invalid_argument("expected an integer, got " + j.dump());
}

std::size_t as_size(const json& j) { return static_cast<std::size_t>(as_u64(j)); }

bool as_bool(const json& j) {
  if (!j.is_boolean()) throw std::invalid_argument("expected true or false, got " + j.dump());
  return j.get<bool>();
}

std::string as_string(const json& j) {
  if (!j.is_string()) throw std::invalid_argument("expected a string, got " + j.dump());
  return j.get<std::string>();
}

std::vector<std::size_t> as_sizes(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of integers, got " + j.dump());
  std::vector<std::size_t> out;
  for (const json& v : j) out.push_back(as_size(v));
  return out;
}

struct Field {
  const char* key;
  const char* help;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

// Shorthand for the common scalar cases.
template <typename T>
Field number(const char* key, const char* help, T TrainerConfig::*member) {
  return {key, help, [member](const RunConfig& c) { return json(c.trainer.*member); },
          [member](RunConfig& c, const json& j) {
            if constexpr (std::is_same_v<T, double>) {
              c.trainer.*member = as_double(j);
            } else if constexpr (std::is_same_v<T, bool>) {
              c.trainer.*member = as_bool(j);
            } else {
              c.trainer.*member = static_cast<T>(as_u64(j));
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"mode", "hsml or maml",
                 [](const RunConfig& c) { return json(mode_name(c.trainer.mode)); },
                 [](RunConfig& c, const json& j) { c.trainer.mode = parse_mode(as_string(j)); }});
    f.push_back(number("alpha", "inner-loop step size", &TrainerConfig::alpha));
    f.push_back(number("beta", "outer (meta) step size", &TrainerConfig::beta));
    f.push_back(number("meta_batch", "tasks per meta-iteration", &TrainerConfig::meta_batch));
    f.push_back(number("inner_steps_train", "inner steps during meta-training",
                       &TrainerConfig::inner_steps_train));
    f.push_back(number("inner_steps_test", "inner steps at evaluation",
                       &TrainerConfig::inner_steps_test));
    f.push_back(number("recon_weight", "weight of the aggregator reconstruction loss",
                       &TrainerConfig::recon_weight));
    f.push_back(number("expansion_threshold", "loss ratio that triggers a new cluster",
                       &TrainerConfig::expansion_threshold));
    f.push_back(number("window", "iterations per loss-averaging window", &TrainerConfig::window));
    f.push_back(number("iterations", "total meta-iterations", &TrainerConfig::iterations));
    f.push_back(number("expansion", "grow the bottom cluster level during training",
                       &TrainerConfig::expansion));
    f.push_back(number("shots", "support examples per task", &TrainerConfig::shots));
    f.push_back(number("query_size", "query examples per training task",
                       &TrainerConfig::query_size));
    f.push_back(number("eval_permutations", "support orderings averaged by the recurrent aggregator",
                       &TrainerConfig::eval_permutations));
    f.push_back(number("first_order", "drop second-order terms of the meta-gradient",
                       &TrainerConfig::first_order));
    f.push_back({"optimizer", "adam or sgd",
                 [](const RunConfig& c) { return json(optimizer_name(c.trainer.optimizer)); },
                 [](RunConfig& c, const json& j) {
                   c.trainer.optimizer = parse_optimizer(as_string(j));
                 }});
    f.push_back(number("clip_norm", "meta-gradient global-norm clip (<= 0 disables)",
                       &TrainerConfig::clip_norm));
    f.push_back({"loss", "mean or sum squared error",
                 [](const RunConfig& c) { return json(reduction_name(c.trainer.loss)); },
                 [](RunConfig& c, const json& j) { c.trainer.loss = parse_reduction(as_string(j)); }});
    f.push_back({"gate", "learned or identity",
                 [](const RunConfig& c) { return json(gate_mode_name(c.trainer.gate)); },
                 [](RunConfig& c, const json& j) { c.trainer.gate = parse_gate_mode(as_string(j)); }});
    f.push_back({"hidden_sizes", "hidden layer widths of the regressor",
                 [](const RunConfig& c) {
                   const auto& w = c.trainer.arch.widths;
                   return json(std::vector<std::size_t>(w.begin() + 1, w.end() - 1));
                 },
                 [](RunConfig& c, const json& j) {
                   std::vector<std::size_t> widths{1};
                   for (std::size_t w : as_sizes(j)) widths.push_back(w);
                   widths.push_back(1);
                   c.trainer.arch.widths = widths;
                 }});
    f.push_back({"activation", "relu or tanh",
                 [](const RunConfig& c) { return json(activation_name(c.trainer.arch.hidden)); },
                 [](RunConfig& c, const json& j) {
                   c.trainer.arch.hidden = parse_activation(as_string(j));
                 }});
    f.push_back({"aggregator", "raa (recurrent) or paa (pooling)",
                 [](const RunConfig& c) { return json(aggregator_name(c.trainer.aggregator.kind)); },
                 [](RunConfig& c, const json& j) {
                   c.trainer.aggregator.kind = parse_aggregator(as_string(j));
                 }});
    f.push_back({"pool", "mean or max pooling for paa",
                 [](const RunConfig& c) { return json(pool_name(c.trainer.aggregator.pool)); },
                 [](RunConfig& c, const json& j) {
                   c.trainer.aggregator.pool = parse_pool(as_string(j));
                 }});
    f.push_back({"embed_dim", "pre-embedding width",
                 [](const RunConfig& c) { return json(c.trainer.aggregator.embed_dim); },
                 [](RunConfig& c, const json& j) { c.trainer.aggregator.embed_dim = as_size(j); }});
    f.push_back({"repr_dim", "task representation width",
                 [](const RunConfig& c) { return json(c.trainer.aggregator.repr_dim); },
                 [](RunConfig& c, const json& j) {
                   c.trainer.aggregator.repr_dim = as_size(j);
                   c.trainer.cluster.dim = c.trainer.aggregator.repr_dim;
                 }});
    f.push_back({"hierarchy", "clusters per level, bottom first, ending in 1",
                 [](const RunConfig& c) { return json(c.trainer.cluster.sizes); },
                 [](RunConfig& c, const json& j) { c.trainer.cluster.sizes = as_sizes(j); }});
    f.push_back({"sigma", "assignment temperature",
                 [](const RunConfig& c) { return json(c.trainer.cluster.sigma); },
                 [](RunConfig& c, const json& j) { c.trainer.cluster.sigma = as_double(j); }});
    f.push_back({"learnable_sigma", "learn one temperature per level",
                 [](const RunConfig& c) { return json(c.trainer.cluster.learnable_sigma); },
                 [](RunConfig& c, const json& j) { c.trainer.cluster.learnable_sigma = as_bool(j); }});
    f.push_back({"center_std", "std of the random cluster-center initialisation",
                 [](const RunConfig& c) { return json(c.trainer.cluster.center_std); },
                 [](RunConfig& c, const json& j) { c.trainer.cluster.center_std = as_double(j); }});
    f.push_back({"schedule", "task-family stages: [{\"iteration\": n, \"families\": [...]}]",
                 [](const RunConfig& c) { return to_json(c.trainer.schedule); },
                 [](RunConfig& c, const json& j) {
                   try {
                     c.trainer.schedule = schedule_from_json(j);
                   } catch (const json::exception&) {
                     throw std::invalid_argument("malformed stage list " + j.dump());
                   }
                 }});
    f.push_back({"seed", "random seed",
                 [](const RunConfig& c) { return json(c.trainer.seed); },
                 [](RunConfig& c, const json& j) { c.trainer.seed = as_u64(j); }});
    f.push_back({"out_dir", "output directory",
                 [](const RunConfig& c) { return json(c.out_dir); },
                 [](RunConfig& c, const json& j) { c.out_dir = as_string(j); }});
    f.push_back({"checkpoint_every", "iterations between checkpoints (0 = final only)",
                 [](const RunConfig& c) { return json(c.checkpoint_every); },
                 [](RunConfig& c, const json& j) { c.checkpoint_every = as_size(j); }});
    f.push_back({"eval_every", "iterations between evaluations (0 = never)",
                 [](const RunConfig& c) { return json(c.eval_every); },
                 [](RunConfig& c, const json& j) { c.eval_every = as_size(j); }});
    f.push_back({"eval_tasks", "tasks per evaluation",
                 [](const RunConfig& c) { return json(c.eval_tasks); },
                 [](RunConfig& c, const json& j) { c.eval_tasks = as_size(j); }});
    f.push_back({"export_analysis", "write analysis exports after training",
                 [](const RunConfig& c) { return json(c.export_analysis); },
                 [](RunConfig& c, const json& j) { c.export_analysis = as_bool(j); }});
    return f;
  }();
  return table;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

std::string config_key_help(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return f.help;
  }
  return {};
}

json to_json(const RunConfig& config) {
  json j = json::object();
  for (const Field& f : fields()) j[f.key] = f.get(config);
  return j;
}

void apply_overrides(RunConfig& config, const json& overrides) {
  std::vector<std::string> errors;
  if (!overrides.is_object()) {
    throw ConfigError({"configuration must be a JSON object"});
  }
  for (const auto& [key, value] : overrides.items()) {
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (field == nullptr) {
      errors.push_back(key + ": unknown key");
      continue;
    }
    try {
      field->set(config, value);
    } catch (const std::exception& e) {
      errors.push_back(key + ": " + e.what());
    }
  }
  for (std::string& e : config.trainer.validate()) errors.push_back(std::move(e));
  if (config.eval_tasks == 0) errors.emplace_back("eval_tasks: must be >= 1");
  if (config.out_dir.empty()) errors.emplace_back("out_dir: must not be empty");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open"});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  RunConfig config;
  apply_overrides(config, j);
  return config;
}

void save_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(config).dump(2) << '\n';
}

json parse_flag_value(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return json(text);
  return j;
}

}  // namespace hsml::harness
