// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "hsml/autodiff/ops.hpp"
#include "hsml/gate.hpp"

namespace hsml {

std::string_view mode_name(Mode m) noexcept { return m == Mode::Hsml ? "hsml" : "maml"; }

Mode parse_mode(std::string_view name) {
  if (name == "hsml") return Mode::Hsml;
  if (name == "maml") return Mode::Maml;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

std::string_view gate_mode_name(GateMode g) noexcept {
  return g == GateMode::Learned ? "learned" : "identity";
}

GateMode parse_gate_mode(std::string_view name) {
  if (name == "learned") return GateMode::Learned;
  if (name == "identity") return GateMode::Identity;
  throw std::invalid_argument("unknown gate mode '" + std::string(name) + "'");
}

std::string_view optimizer_name(OuterOptimizer o) noexcept {
  return o == OuterOptimizer::Adam ? "adam" : "sgd";
}

OuterOptimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return OuterOptimizer::Adam;
  if (name == "sgd") return OuterOptimizer::Sgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

std::vector<std::string> TrainerConfig::validate() const {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };
  require(alpha > 0.0, "alpha: must be > 0");
  require(beta > 0.0, "beta: must be > 0");
  require(meta_batch >= 1, "meta_batch: must be >= 1");
  require(inner_steps_train >= 1, "inner_steps_train: must be >= 1");
  require(inner_steps_test >= 1, "inner_steps_test: must be >= 1");
  require(recon_weight >= 0.0, "recon_weight: must be >= 0");
  require(expansion_threshold > 0.0, "expansion_threshold: must be > 0");
  require(window >= 1, "window: must be >= 1");
  require(shots >= 1, "shots: must be >= 1");
  require(query_size >= 1, "query_size: must be >= 1");
  require(eval_permutations >= 1, "eval_permutations: must be >= 1");
  require(arch.widths.size() >= 2 && arch.widths.front() == 1 && arch.widths.back() == 1,
          "hidden_sizes: the regressor maps one input to one output");
  for (std::size_t w : arch.widths) require(w >= 1, "hidden_sizes: widths must be >= 1");
  require(aggregator.embed_dim >= 1, "embed_dim: must be >= 1");
  require(aggregator.repr_dim >= 1, "repr_dim: must be >= 1");
  require(cluster.dim == aggregator.repr_dim,
          "hierarchy: cluster dimension must equal repr_dim");
  try {
    cluster.validate();
  } catch (const std::invalid_argument& e) {
    errors.emplace_back(e.what());
  }
  try {
    schedule.validate();
  } catch (const std::invalid_argument& e) {
    errors.emplace_back(e.what());
  }
  return errors;
}

bool expansion_rule(double new_mean, double old_mean, double mu) noexcept {
  return new_mean > mu * old_mean;
}

WindowResult expansion_check(LossWindow& window, double loss, std::size_t window_size,
                             double mu) {
  window.sum += loss;
  window.count += 1;
  WindowResult result;
  if (window.count < window_size) return result;
  result.closed = true;
  result.mean = window.sum / static_cast<double>(window.count);
  result.expand = window.previous_mean.has_value() &&
                  expansion_rule(result.mean, *window.previous_mean, mu);
  window.previous_mean = result.mean;
  window.sum = 0.0;
  window.count = 0;
  return result;
}

TrainState init_state(const TrainerConfig& config) {
  TrainState state;
  Rng init(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::Init)));
  state.params[kTheta0] = init_params(config.arch, init);
  if (config.mode == Mode::Hsml) {
    init_aggregator(config.aggregator, init, state.params);
    init_cluster(config.cluster, init, state.params);
    init_gate(config.aggregator.repr_dim, config.arch.param_count(), init, state.params);
  }
  state.cluster = config.cluster;
  state.task_rng = Rng(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::Tasks)));
  state.perm_rng =
      Rng(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::Permutations)));
  state.expand_rng = Rng(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::Expansion)));
  return state;
}

TaskResult task_step(const TrainerConfig& config, const ClusterConfig& cluster,
                     const VarMap& vars, const Task& task, const TaskOptions& options) {
  if (task.support.empty() || task.query.empty()) {
    throw std::invalid_argument("task_step: support and query sets must be non-empty");
  }
  const ad::Var theta0 = vars.at(kTheta0);
  ad::Graph& graph = theta0.graph();
  const DataVars support = data_leaves(graph, task.support);
  const DataVars query = data_leaves(graph, task.query);

  TaskResult r;
  if (config.mode == Mode::Maml) {
    r.gated_init = theta0;
  } else {
    const Encoding enc = encode(config.aggregator, vars, task.support, options.permutations);
    const ClusterOutput clustered = cluster_forward(cluster, vars, enc.representation);
    ad::Var gate;
    if (config.gate == GateMode::Identity) {
      gate = graph.leaf(ad::Tensor(theta0.shape(), 1.0));
    } else {
      gate = gate_forward(enc.representation, clustered.representation, vars.at(kGateWeight),
                          vars.at(kGateBias));
    }
    r.gated_init = apply_gate(theta0, gate);
    r.recon_loss = enc.recon_loss;
    r.assignments = clustered.assignments;
  }

  const InnerLoopOptions inner{config.alpha, options.inner_steps, config.first_order,
                               config.loss};
  try {
    r.adapted = inner_adapt(config.arch, r.gated_init, support, inner);
  } catch (const NonFiniteLossError& e) {
    throw TrainingError(std::string(e.what()) + " while adapting to a " +
                        std::string(family_name(task.family)) + " task");
  }
  r.query_loss = mse_loss(config.arch, r.adapted, query, config.loss);
  r.objective = config.mode == Mode::Maml
                    ? r.query_loss
                    : ad::add(r.query_loss, ad::scale(r.recon_loss, config.recon_weight));
  return r;
}

BatchGradient meta_gradient(const TrainerConfig& config, const ParamSet& params,
                            const ClusterConfig& cluster, const std::vector<Task>& batch,
                            const std::vector<std::vector<std::size_t>>& permutations) {
  BatchGradient out;
  out.grads = zeros_like(params);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Graph graph;
    const VarMap vars = VarMap::bind(graph, params);
    TaskOptions options;
    options.inner_steps = config.inner_steps_train;
    if (i < permutations.size()) options.permutations.push_back(permutations[i]);
    const TaskResult r = task_step(config, cluster, vars, batch[i], options);
    out.query_loss += r.query_loss.value().item();
    if (r.recon_loss.valid()) out.recon_loss += r.recon_loss.value().item();

    const std::vector<ad::Var> leaves = vars.leaves();
    const std::vector<ad::Var> grads = graph.grad(r.objective, leaves);
    std::size_t k = 0;
    for (auto& [name, total] : out.grads) {
      const ad::Tensor& g = grads[k++].value();
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += g[j];
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(batch.size(), 1));
  out.query_loss /= n;
  out.recon_loss /= n;
  return out;
}

StepMetrics meta_step(const TrainerConfig& config, TrainState& state,
                      const std::vector<Task>& batch) {
  std::vector<std::vector<std::size_t>> permutations;
  if (config.mode == Mode::Hsml && config.aggregator.kind == AggregatorKind::Recurrent) {
    for (const Task& task : batch) permutations.push_back(state.perm_rng.permutation(task.support.size()));
  }
  BatchGradient bg = meta_gradient(config, state.params, state.cluster, batch, permutations);

  if (!all_finite(bg.grads)) {
    std::ostringstream msg;
    msg << "non-finite meta-gradient at iteration " << state.iteration << ":";
    for (const auto& [name, g] : bg.grads) {
      if (!g.all_finite()) msg << " " << name;
    }
    msg << " (global norm " << global_norm(bg.grads) << ")";
    throw TrainingError(msg.str());
  }
  StepMetrics metrics;
  metrics.iteration = state.iteration;
  metrics.query_loss = bg.query_loss;
  metrics.recon_loss = bg.recon_loss;
  metrics.grad_norm = clip_global_norm(bg.grads, config.clip_norm);
  if (config.optimizer == OuterOptimizer::Adam) {
    adam_step(state.params, bg.grads, state.adam, AdamOptions{.learning_rate = config.beta});
  } else {
    sgd_step(state.params, bg.grads, config.beta);
  }
  metrics.clusters = config.mode == Mode::Hsml ? state.cluster.sizes.front() : 0;
  return metrics;
}

StepMetrics train_iteration(const TrainerConfig& config, TrainState& state) {
  const FamilySet active = active_families(config.schedule, state.iteration);
  std::vector<Task> batch;
  batch.reserve(config.meta_batch);
  for (std::size_t b = 0; b < config.meta_batch; ++b) {
    batch.push_back(sample_task(state.task_rng, active, config.shots, config.query_size));
  }
  StepMetrics metrics = meta_step(config, state, batch);

  const WindowResult w =
      expansion_check(state.window, metrics.query_loss, config.window, config.expansion_threshold);
  if (w.closed) state.window_means.push_back(w.mean);
  if (w.expand && config.expansion && config.mode == Mode::Hsml) {
    expand(state.cluster, state.expand_rng, state.params);
    if (config.optimizer == OuterOptimizer::Adam) {
      conform_moments(state.adam.first_moment, state.params);
      conform_moments(state.adam.second_moment, state.params);
    }
    state.expansions.push_back(state.iteration);
    metrics.expanded = true;
    metrics.clusters = state.cluster.sizes.front();
  }
  state.iteration += 1;
  return metrics;
}

void train(const TrainerConfig& config, TrainState& state,
           const std::function<void(const StepMetrics&)>& on_step) {
  while (state.iteration < config.iterations) {
    const StepMetrics m = train_iteration(config, state);
    if (on_step) on_step(m);
  }
}

FamilyStats summarize(std::string name, const std::vector<double>& values) {
  FamilyStats s;
  s.name = std::move(name);
  s.count = values.size();
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

std::vector<Task> evaluation_tasks(const EvalOptions& options) {
  Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(Stream::Eval)));
  std::vector<Task> tasks;
  tasks.reserve(options.n_tasks);
  for (std::size_t i = 0; i < options.n_tasks; ++i) {
    tasks.push_back(sample_task(rng, options.families, options.shots, options.query_size));
  }
  return tasks;
}

EvalReport evaluate_predictor(const std::vector<Task>& tasks, std::size_t shots,
                              const Predictor& predict) {
  EvalReport report;
  report.shots = shots;
  std::vector<double> all;
  std::map<Family, std::vector<double>> per_family;
  for (const Task& task : tasks) {
    const std::vector<double> pred = predict(task);
    double se = 0.0;
    for (std::size_t j = 0; j < task.query.size(); ++j) {
      const double diff = pred.at(j) - task.query.y[j];
      se += diff * diff;
    }
    const double mse = se / static_cast<double>(task.query.size());
    all.push_back(mse);
    per_family[task.family].push_back(mse);
    report.tasks.push_back(TaskEval{task.family, mse, {}});
  }
  for (const auto& [family, values] : per_family) {
    report.families.push_back(summarize(std::string(family_name(family)), values));
  }
  report.overall = summarize("overall", all);
  return report;
}

namespace {

std::vector<std::vector<std::size_t>> eval_permutations(const TrainerConfig& config,
                                                        std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> perms;
  if (config.mode != Mode::Hsml || config.aggregator.kind != AggregatorKind::Recurrent) {
    return perms;
  }
  Rng rng(seed);
  for (std::size_t p = 0; p < config.eval_permutations; ++p) perms.push_back(rng.permutation(n));
  return perms;
}

}  // namespace

TaskAnalysis analyze_task(const TrainerConfig& config, const ParamSet& params,
                          const ClusterConfig& cluster, const Task& task,
                          const std::vector<double>& inputs, std::uint64_t perm_seed) {
  ad::Graph graph;
  const VarMap vars = VarMap::bind(graph, params);
  TaskOptions options;
  options.inner_steps = config.inner_steps_test;
  options.permutations = eval_permutations(config, task.support.size(), perm_seed);
  const TaskResult r = task_step(config, cluster, vars, task, options);

  TaskAnalysis out;
  if (!r.assignments.empty()) {
    const auto values = r.assignments.front().value().data();
    out.assignment.assign(values.begin(), values.end());
  }
  out.gated_init = r.gated_init.value();
  const ad::Var adapted = graph.leaf(r.adapted.value());
  const ad::Var x = graph.leaf(ad::Tensor(ad::Shape{inputs.size(), 1}, inputs));
  const auto pred = forward(config.arch, adapted, x).value().data();
  out.predictions.assign(pred.begin(), pred.end());
  return out;
}

EvalReport evaluate(const TrainerConfig& config, const ParamSet& params,
                    const ClusterConfig& cluster, const EvalOptions& options) {
  const std::vector<Task> tasks = evaluation_tasks(options);
  const std::uint64_t perm_base =
      derive_seed(options.seed, static_cast<std::uint64_t>(Stream::Permutations));
  std::vector<std::vector<double>> assignments;
  std::size_t index = 0;
  EvalReport report = evaluate_predictor(tasks, options.shots, [&](const Task& task) {
    TaskAnalysis a =
        analyze_task(config, params, cluster, task, task.query.x, derive_seed(perm_base, index++));
    assignments.push_back(std::move(a.assignment));
    return a.predictions;
  });
  for (std::size_t i = 0; i < report.tasks.size(); ++i) {
    report.tasks[i].assignment = std::move(assignments[i]);
  }
  return report;
}

ContinualResult continual_train(const TrainerConfig& config, TrainState& state,
                                const std::function<void(const StepMetrics&)>& on_step) {
  ContinualResult result;
  while (state.iteration < config.iterations) {
    const std::size_t closed_before = state.window_means.size();
    const StepMetrics m = train_iteration(config, state);
    if (state.window_means.size() > closed_before) {
      result.window_means.push_back(state.window_means.back());
      result.window_clusters.push_back(m.clusters);
    }
    if (on_step) on_step(m);
  }
  result.expansions = state.expansions;
  return result;
}

}  // namespace hsml
