// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// hsml: train, evaluate and analyse hierarchically clustered meta-learners
// on the toy-regression benchmark.
//
// Exit codes: 0 success, 1 runtime error, 2 invalid configuration,
// 3 training stopped on a numeric failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hsml/harness/checkpoint.hpp"
#include "hsml/harness/commands.hpp"
#include "hsml/harness/config.hpp"

namespace {

namespace fs = std::filesystem;
using hsml::harness::Checkpoint;
using hsml::harness::ConfigError;
using hsml::harness::RunConfig;

// Flags that mirror config keys; a few keys also have a short alias.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON configuration file");
    for (const std::string& key : hsml::harness::config_keys()) {
      std::string names = "--" + key;
      if (key == "out_dir") names = "--out,--out_dir";
      if (key == "eval_tasks") names = "--tasks,--eval_tasks";
      app->add_option(names, values[key], hsml::harness::config_key_help(key));
    }
  }

  nlohmann::json overrides(const CLI::App* app) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, text] : values) {
      if (app->count("--" + key) > 0) j[key] = hsml::harness::parse_flag_value(text);
    }
    return j;
  }

  // File (or `base`) first, flags on top.
  RunConfig resolve(const CLI::App* app, std::optional<RunConfig> base = std::nullopt) const {
    RunConfig config = base ? *base : RunConfig{};
    if (!config_path.empty()) config = hsml::harness::load_config(config_path);
    hsml::harness::apply_overrides(config, overrides(app));
    return config;
  }
};

struct EvalFlags {
  std::string checkpoint;
  std::string out;
  std::size_t shots = 0;
  std::size_t tasks = 0;
  std::uint64_t seed = 0;

  void attach(CLI::App* app, std::size_t default_tasks) {
    tasks = default_tasks;
    app->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    app->add_option("--out", out, "output directory (default: next to the checkpoint)");
    app->add_option("--shots", shots, "support examples per task (default: training value)");
    app->add_option("--tasks", tasks, "number of evaluation tasks")->capture_default_str();
    app->add_option("--seed", seed, "task seed (default: training seed)");
  }

  hsml::EvalOptions options(const CLI::App* app, const Checkpoint& cp) const {
    hsml::EvalOptions o;
    o.n_tasks = tasks;
    o.shots = app->count("--shots") > 0 ? shots : cp.config.trainer.shots;
    o.seed = app->count("--seed") > 0 ? seed : cp.config.trainer.seed;
    for (const auto& stage : cp.config.trainer.schedule.stages) {
      o.families.insert(stage.families.begin(), stage.families.end());
    }
    if (o.n_tasks == 0) throw ConfigError({"tasks: must be >= 1"});
    if (o.shots == 0) throw ConfigError({"shots: must be >= 1"});
    return o;
  }

  fs::path out_dir(const std::string& leaf) const {
    return out.empty() ? fs::path(checkpoint).parent_path() / leaf : fs::path(out);
  }
};

void print_report(const hsml::EvalReport& report) {
  std::cout << hsml::harness::families_csv(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchically structured meta-learning on toy regression"};
  app.require_subcommand(1);

  CLI::App* train = app.add_subcommand("train", "meta-train a model");
  ConfigFlags train_flags;
  train_flags.attach(train);
  std::string resume_path;
  train->add_option("--checkpoint", resume_path,
                    "resume from this checkpoint; training continues to --iterations in total");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  EvalFlags eval_flags;
  eval_flags.attach(eval, 1000);

  CLI::App* continual = app.add_subcommand("continual", "train on a task stream");
  ConfigFlags continual_flags;
  continual_flags.attach(continual);
  std::string variant = "dynamic";
  continual->add_option("--variant", variant, "dynamic or static-K")->capture_default_str();

  CLI::App* analysis = app.add_subcommand("export-analysis", "export assignments, gates and curves");
  EvalFlags analysis_flags;
  analysis_flags.attach(analysis, 100);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      std::optional<Checkpoint> resume;
      std::optional<RunConfig> base;
      if (!resume_path.empty()) {
        resume = hsml::harness::load_checkpoint(resume_path);
        base = resume->config;
      }
      const RunConfig config = train_flags.resolve(train, base);
      const auto outcome = hsml::harness::cmd_train(config, std::move(resume), &std::cerr);
      if (outcome.failed) return 3;
      std::cerr << "wrote " << fs::path(config.out_dir) / hsml::harness::kCheckpointFile << '\n';
    } else if (eval->parsed()) {
      const Checkpoint cp = hsml::harness::load_checkpoint(eval_flags.checkpoint);
      print_report(hsml::harness::cmd_eval(cp, eval_flags.options(eval, cp), eval_flags.out_dir("eval")));
    } else if (continual->parsed()) {
      const RunConfig config = continual_flags.resolve(continual);
      const auto outcome = hsml::harness::cmd_continual(
          config, hsml::harness::parse_variant(variant), &std::cerr);
      std::cerr << "expansions:";
      for (std::size_t it : outcome.result.expansions) std::cerr << ' ' << it;
      std::cerr << '\n';
      print_report(outcome.report);
    } else if (analysis->parsed()) {
      const Checkpoint cp = hsml::harness::load_checkpoint(analysis_flags.checkpoint);
      const fs::path dir = analysis_flags.out_dir("analysis");
      hsml::harness::cmd_export_analysis(cp, analysis_flags.options(analysis, cp), dir);
      std::cerr << "wrote " << dir << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
