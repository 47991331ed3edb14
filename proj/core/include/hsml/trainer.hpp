// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Meta-training and evaluation.
//
// In HSML mode each task goes through
//   support set -> aggregator (g, L_r) -> clustering (h^L) -> gate o
//   -> theta0 * o -> inner adaptation on the support set -> query loss,
// all on one graph, and the outer objective is
//   sum_i [ L_query(theta_i) + xi * L_r,i ].
// MAML mode adapts theta0 directly and has no other parameters.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsml/aggregator.hpp"
#include "hsml/autodiff/graph.hpp"
#include "hsml/cluster.hpp"
#include "hsml/learner.hpp"
#include "hsml/optimizer.hpp"
#include "hsml/params.hpp"
#include "hsml/rng.hpp"
#include "hsml/taskgen.hpp"

namespace hsml {

/// Name of the shared base-learner initialization in every ParamSet.
inline constexpr const char* kTheta0 = "theta0";

enum class Mode { Hsml, Maml };
/// Identity forces o = 1 (the MAML reduction); learned is the normal gate.
enum class GateMode { Learned, Identity };
enum class OuterOptimizer { Adam, Sgd };

std::string_view mode_name(Mode m) noexcept;
Mode parse_mode(std::string_view name);
std::string_view gate_mode_name(GateMode g) noexcept;
GateMode parse_gate_mode(std::string_view name);
std::string_view optimizer_name(OuterOptimizer o) noexcept;
OuterOptimizer parse_optimizer(std::string_view name);

/// Seed-derivation stream ids.
enum class Stream : std::uint64_t { Init = 1, Tasks = 2, Permutations = 3, Expansion = 4, Eval = 5 };

struct TrainerConfig {
  Mode mode = Mode::Hsml;
  double alpha = 0.001;
  double beta = 0.001;
  std::size_t meta_batch = 25;
  std::size_t inner_steps_train = 5;
  std::size_t inner_steps_test = 10;
  double recon_weight = 0.01;         // xi
  double expansion_threshold = 1.25;  // mu
  std::size_t window = 1000;          // Q, iterations per loss window
  std::size_t iterations = 10000;
  bool expansion = false;
  std::size_t shots = 5;
  std::size_t query_size = 100;
  std::size_t eval_permutations = 5;
  bool first_order = false;
  OuterOptimizer optimizer = OuterOptimizer::Adam;
  double clip_norm = 10.0;  // <= 0 disables
  LossReduction loss = LossReduction::Mean;
  GateMode gate = GateMode::Learned;
  MlpArch arch;
  AggregatorConfig aggregator;
  ClusterConfig cluster;
  StreamSchedule schedule = StreamSchedule::all_families();
  std::uint64_t seed = 1;

  /// Every violated constraint, one message each; empty when valid.
  std::vector<std::string> validate() const;
};

/// Disjoint consecutive windows of per-iteration training losses.
struct LossWindow {
  double sum = 0.0;
  std::size_t count = 0;
  std::optional<double> previous_mean;  // L_old
};

/// L_new > mu * L_old.
bool expansion_rule(double new_mean, double old_mean, double mu) noexcept;

/// Adds one iteration's loss. When the window reaches `window_size` entries
/// it closes: the result is true iff a previous window exists and the rule
/// fires; the closed mean becomes L_old and the window restarts.
struct WindowResult {
  bool closed = false;
  bool expand = false;
  double mean = 0.0;
};
WindowResult expansion_check(LossWindow& window, double loss, std::size_t window_size, double mu);

struct TrainState {
  ParamSet params;
  ClusterConfig cluster;  // current level sizes (grow with expansion)
  AdamState adam;
  std::size_t iteration = 0;
  LossWindow window;
  std::vector<double> window_means;
  std::vector<std::size_t> expansions;  // iterations at which a cluster was added
  Rng task_rng;
  Rng perm_rng;
  Rng expand_rng;
};

TrainState init_state(const TrainerConfig& config);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaskResult {
  ad::Var query_loss;
  ad::Var recon_loss;  // invalid in MAML mode
  ad::Var objective;
  ad::Var gated_init;  // theta0 in MAML mode
  ad::Var adapted;
  std::vector<ad::Var> assignments;
};

struct TaskOptions {
  std::size_t inner_steps = 5;
  /// RAA reading orders; ignored by PAA and MAML.
  std::vector<std::vector<std::size_t>> permutations;
};

/// Builds the per-task computation on the graph owning `vars`.
TaskResult task_step(const TrainerConfig& config, const ClusterConfig& cluster,
                     const VarMap& vars, const Task& task, const TaskOptions& options);

struct BatchGradient {
  ParamSet grads;
  double query_loss = 0.0;  // mean over tasks
  double recon_loss = 0.0;  // mean over tasks
};

/// Gradient of sum_i objective_i with respect to every parameter, tasks
/// accumulated in batch order.
BatchGradient meta_gradient(const TrainerConfig& config, const ParamSet& params,
                            const ClusterConfig& cluster, const std::vector<Task>& batch,
                            const std::vector<std::vector<std::size_t>>& permutations);

struct StepMetrics {
  std::size_t iteration = 0;
  double query_loss = 0.0;
  double recon_loss = 0.0;
  std::size_t clusters = 0;
  double grad_norm = 0.0;
  bool expanded = false;
};

/// One outer update of state.params on `batch`. Permutations are drawn from
/// state.perm_rng. Does not advance the iteration counter.
StepMetrics meta_step(const TrainerConfig& config, TrainState& state,
                      const std::vector<Task>& batch);

/// Samples a batch from the families active at state.iteration, runs
/// meta_step, feeds the loss window (expanding when enabled) and advances the
/// iteration counter.
StepMetrics train_iteration(const TrainerConfig& config, TrainState& state);

/// Runs train_iteration until state.iteration == config.iterations.
void train(const TrainerConfig& config, TrainState& state,
           const std::function<void(const StepMetrics&)>& on_step = {});

struct FamilyStats {
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> ci95;  // 1.96 sd / sqrt(N); absent for N < 2
};

struct TaskEval {
  Family family = Family::Sinusoid;
  double mse = 0.0;
  std::vector<double> assignment;  // first-level soft assignment, HSML only
};

struct EvalReport {
  std::size_t shots = 0;
  std::vector<FamilyStats> families;
  FamilyStats overall;
  std::vector<TaskEval> tasks;
};

struct EvalOptions {
  FamilySet families{kAllFamilies.begin(), kAllFamilies.end()};
  std::size_t n_tasks = 1000;
  std::size_t shots = 5;
  std::size_t query_size = 100;
  std::uint64_t seed = 1;
};

FamilyStats summarize(std::string name, const std::vector<double>& values);

/// Evaluation tasks for `options`, identical for a given seed.
std::vector<Task> evaluation_tasks(const EvalOptions& options);

/// Per-task prediction on the query inputs.
using Predictor = std::function<std::vector<double>(const Task&)>;
EvalReport evaluate_predictor(const std::vector<Task>& tasks, std::size_t shots,
                              const Predictor& predict);

struct TaskAnalysis {
  std::vector<double> assignment;  // first-level soft assignment
  ad::Tensor gated_init;
  std::vector<double> predictions;  // at `inputs`
};

/// Adapts to task.support and predicts at `inputs`. Permutations for RAA are
/// derived from `perm_seed`.
TaskAnalysis analyze_task(const TrainerConfig& config, const ParamSet& params,
                          const ClusterConfig& cluster, const Task& task,
                          const std::vector<double>& inputs, std::uint64_t perm_seed);

/// Adapts with inner_steps_test steps and reports query MSE per family and
/// overall. Does not modify params.
EvalReport evaluate(const TrainerConfig& config, const ParamSet& params,
                    const ClusterConfig& cluster, const EvalOptions& options);

struct ContinualResult {
  std::vector<double> window_means;
  std::vector<std::size_t> window_clusters;
  std::vector<std::size_t> expansions;
};

/// Trains with the families of config.schedule, recording the mean training
/// loss of every window.
ContinualResult continual_train(const TrainerConfig& config, TrainState& state,
                                const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace hsml
