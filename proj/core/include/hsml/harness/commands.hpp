// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// The experiment commands behind the CLI. Each one owns its output
// directory for the duration of the call (see OutputLock) and is
// deterministic given its inputs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsml/harness/checkpoint.hpp"
#include "hsml/harness/config.hpp"
#include "hsml/trainer.hpp"

namespace hsml::harness {

/// Exclusive claim on an output directory via a lock file created with
/// O_EXCL semantics. Throws std::runtime_error if the directory is taken.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kCheckpointFile = "checkpoint.bin";

struct TrainOutcome {
  TrainState state;
  bool failed = false;
  std::string error;
};

/// Trains to config.trainer.iterations total iterations, starting from
/// `resume` when given. Writes config.json, metrics.csv (appended across
/// resumes), checkpoint.bin and, on a numeric failure, error.json next to a
/// checkpoint of the last good state.
TrainOutcome cmd_train(const RunConfig& config, std::optional<Checkpoint> resume = std::nullopt,
                       std::ostream* log = nullptr);

nlohmann::json to_json(const EvalReport& report);
/// family,mean_mse,ci95 rows plus an overall row; NA marks an absent CI.
std::string families_csv(const EvalReport& report);

/// Evaluates a checkpoint; writes eval.json and families.csv into out_dir.
EvalReport cmd_eval(const Checkpoint& checkpoint, const EvalOptions& options,
                    const std::filesystem::path& out_dir);

struct ContinualVariant {
  bool dynamic = true;
  std::size_t static_clusters = 0;  // bottom-level size for static variants
};
/// "dynamic" or "static-K".
ContinualVariant parse_variant(const std::string& text);
std::string variant_name(const ContinualVariant& v);

struct ContinualOutcome {
  ContinualResult result;
  TrainState state;
  EvalReport report;
};

/// Trains on config.trainer.schedule with expansion per `variant`, then
/// evaluates on every family of the schedule. Writes metrics.csv,
/// loss_curve.csv, checkpoint.bin, eval.json and families.csv.
ContinualOutcome cmd_continual(const RunConfig& config, const ContinualVariant& variant,
                               std::ostream* log = nullptr);

/// Writes assignments.csv, gated_init.csv and curves.json for n_tasks
/// evaluation tasks.
void cmd_export_analysis(const Checkpoint& checkpoint, const EvalOptions& options,
                         const std::filesystem::path& out_dir);

struct SimilarityReport {
  double intra = 0.0;  // mean cosine similarity within a family
  double inter = 0.0;  // mean cosine similarity across families
};
/// Cosine similarity of first-level assignment vectors over
/// `tasks_per_family` tasks of each family.
SimilarityReport assignment_similarity(const TrainerConfig& config, const ParamSet& params,
                                       const ClusterConfig& cluster,
                                       std::size_t tasks_per_family, std::size_t shots,
                                       std::uint64_t seed);

}  // namespace hsml::harness
