// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>

#include "hsml/autodiff/ops.hpp"
#include "hsml/gate.hpp"
#include "hsml/trainer.hpp"
#include "support/numeric.hpp"

using namespace hsml;
using hsml::testing::close;

namespace {

TrainerConfig small_config(Mode mode) {
  TrainerConfig c;
  c.mode = mode;
  c.arch.widths = {1, 8, 8, 1};
  c.aggregator.embed_dim = 6;
  c.aggregator.repr_dim = 6;
  c.cluster.dim = 6;
  c.cluster.sizes = {3, 2, 1};
  c.meta_batch = 3;
  c.query_size = 10;
  c.alpha = 0.01;
  return c;
}

std::vector<Task> sample_batch(std::uint64_t seed, std::size_t n, std::size_t shots = 5,
                               std::size_t query = 10) {
  Rng rng(seed);
  const FamilySet all(kAllFamilies.begin(), kAllFamilies.end());
  std::vector<Task> batch;
  for (std::size_t i = 0; i < n; ++i) batch.push_back(sample_task(rng, all, shots, query));
  return batch;
}

std::vector<std::vector<std::size_t>> identity_perms(const std::vector<Task>& batch) {
  std::vector<std::vector<std::size_t>> perms;
  for (const Task& t : batch) {
    std::vector<std::size_t> p(t.support.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = i;
    perms.push_back(p);
  }
  return perms;
}

// Sum of per-task objectives, rebuilt from scratch.
double batch_objective(const TrainerConfig& config, const ParamSet& params,
                       const ClusterConfig& cluster, const std::vector<Task>& batch,
                       const std::vector<std::vector<std::size_t>>& perms) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Graph g;
    const VarMap vars = VarMap::bind(g, params);
    TaskOptions o;
    o.inner_steps = config.inner_steps_train;
    if (i < perms.size()) o.permutations.push_back(perms[i]);
    total += task_step(config, cluster, vars, batch[i], o).objective.value().item();
  }
  return total;
}

}  // namespace

TEST_CASE("names round-trip", "[trainer]") {
  CHECK(parse_mode(mode_name(Mode::Maml)) == Mode::Maml);
  CHECK(parse_gate_mode(gate_mode_name(GateMode::Identity)) == GateMode::Identity);
  CHECK(parse_optimizer(optimizer_name(OuterOptimizer::Sgd)) == OuterOptimizer::Sgd);
  CHECK_THROWS_AS(parse_mode("reptile"), std::invalid_argument);
}

TEST_CASE("validation reports every problem", "[trainer]") {
  CHECK(TrainerConfig{}.validate().empty());
  TrainerConfig c;
  c.alpha = -1.0;
  c.meta_batch = 0;
  c.cluster.sizes = {4, 2};
  c.shots = 0;
  const auto errors = c.validate();
  CHECK(errors.size() == 4);
  bool mentions_alpha = false;
  for (const std::string& e : errors) mentions_alpha |= e.rfind("alpha", 0) == 0;
  CHECK(mentions_alpha);
}

TEST_CASE("initial state contents by mode", "[trainer]") {
  const TrainState maml = init_state(small_config(Mode::Maml));
  REQUIRE(maml.params.size() == 1);
  CHECK(maml.params.count(kTheta0) == 1);
  const TrainState hsml = init_state(small_config(Mode::Hsml));
  CHECK(hsml.params.count(kGateWeight) == 1);
  CHECK(hsml.params.count("agg.pre.W") == 1);
  CHECK(hsml.params.count(center_name(0)) == 1);
  CHECK(hsml.cluster.sizes == std::vector<std::size_t>{3, 2, 1});
  // Same seed, same state.
  CHECK(init_state(small_config(Mode::Hsml)).params == hsml.params);
}

TEST_CASE("expansion window truth table", "[trainer]") {
  CHECK(expansion_rule(1.3, 1.0, 1.25));
  CHECK_FALSE(expansion_rule(1.25, 1.0, 1.25));
  CHECK_FALSE(expansion_rule(0.5, 1.0, 1.25));

  LossWindow w;
  CHECK_FALSE(expansion_check(w, 1.0, 2, 1.25).closed);
  WindowResult r = expansion_check(w, 1.0, 2, 1.25);
  CHECK(r.closed);
  CHECK(r.mean == 1.0);
  CHECK_FALSE(r.expand);  // no previous window
  expansion_check(w, 1.3, 2, 1.25);
  r = expansion_check(w, 1.3, 2, 1.25);
  CHECK(r.expand);
  CHECK(*w.previous_mean == 1.3);
  expansion_check(w, 1.0, 2, 1.25);
  CHECK_FALSE(expansion_check(w, 1.0, 2, 1.25).expand);
}

TEST_CASE("a constant loss stream never expands", "[trainer][property]") {
  LossWindow w;
  for (int i = 0; i < 5000; ++i) CHECK_FALSE(expansion_check(w, 0.731, 7, 1.25).expand);
}

TEST_CASE("zero inner step size leaves the query loss unadapted", "[trainer]") {
  TrainerConfig c = small_config(Mode::Maml);
  c.alpha = 0.0;
  const TrainState s = init_state(c);
  const Task task = sample_batch(1, 1).front();
  ad::Graph g;
  const VarMap vars = VarMap::bind(g, s.params);
  const TaskResult r = task_step(c, s.cluster, vars, task, TaskOptions{});
  const double direct =
      mse_loss(c.arch, vars.at(kTheta0), data_leaves(g, task.query), c.loss).value().item();
  CHECK(r.query_loss.value().item() == direct);
  CHECK(r.adapted.value() == s.params.at(kTheta0));
}

TEST_CASE("identity gate without reconstruction reduces to MAML", "[trainer][property]") {
  for (AggregatorKind kind : {AggregatorKind::Recurrent, AggregatorKind::Pooling}) {
    TrainerConfig h = small_config(Mode::Hsml);
    h.gate = GateMode::Identity;
    h.recon_weight = 0.0;
    h.aggregator.kind = kind;
    TrainerConfig m = small_config(Mode::Maml);
    const TrainState hs = init_state(h);
    ParamSet mp{{kTheta0, hs.params.at(kTheta0)}};
    const auto batch = sample_batch(2, 4);
    const auto perms = identity_perms(batch);
    const BatchGradient gh = meta_gradient(h, hs.params, hs.cluster, batch, perms);
    const BatchGradient gm = meta_gradient(m, mp, hs.cluster, batch, {});
    CHECK(gh.grads.at(kTheta0) == gm.grads.at(kTheta0));
    CHECK(gh.query_loss == gm.query_loss);
  }
}

TEST_CASE("without reconstruction weight the aggregator sees only the query loss",
          "[trainer][property]") {
  TrainerConfig c = small_config(Mode::Hsml);
  c.recon_weight = 0.0;
  const TrainState s = init_state(c);
  const Task task = sample_batch(3, 1).front();
  TaskOptions o;
  o.permutations = identity_perms({task});
  ad::Graph g;
  const VarMap vars = VarMap::bind(g, s.params);
  const TaskResult r = task_step(c, s.cluster, vars, task, o);
  const std::vector<ad::Var> wrt{vars.at("agg.raa.enc.Wz"), vars.at("agg.pre.W")};
  const auto full = g.grad(r.objective, wrt);
  const auto query_only = g.grad(r.query_loss, wrt);
  for (std::size_t i = 0; i < wrt.size(); ++i) CHECK(full[i].value() == query_only[i].value());
}

TEST_CASE("zero outer step size leaves parameters unchanged", "[trainer]") {
  for (OuterOptimizer opt : {OuterOptimizer::Adam, OuterOptimizer::Sgd}) {
    TrainerConfig c = small_config(Mode::Hsml);
    c.beta = 0.0;
    c.optimizer = opt;
    TrainState s = init_state(c);
    const ParamSet before = s.params;
    meta_step(c, s, sample_batch(4, 2));
    CHECK(s.params == before);
  }
}

TEST_CASE("duplicated tasks double the meta-gradient", "[trainer][property]") {
  const TrainerConfig c = small_config(Mode::Maml);
  const TrainState s = init_state(c);
  const auto one = sample_batch(5, 1);
  const std::vector<Task> two{one[0], one[0]};
  const BatchGradient g1 = meta_gradient(c, s.params, s.cluster, one, {});
  const BatchGradient g2 = meta_gradient(c, s.params, s.cluster, two, {});
  const ad::Tensor& a = g1.grads.at(kTheta0);
  const ad::Tensor& b = g2.grads.at(kTheta0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == 2.0 * a[i]);

  // So a plain gradient step on [T, T] is theta0 - beta * 2g.
  TrainerConfig sgd = c;
  sgd.optimizer = OuterOptimizer::Sgd;
  sgd.clip_norm = 0.0;
  TrainState s2 = init_state(sgd);
  meta_step(sgd, s2, two);
  const ad::Tensor& t0 = s.params.at(kTheta0);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    CHECK(s2.params.at(kTheta0)[i] == t0[i] - sgd.beta * (2.0 * a[i]));
  }
}

TEST_CASE("reported losses are batch means", "[trainer]") {
  const TrainerConfig c = small_config(Mode::Hsml);
  const TrainState s = init_state(c);
  const auto batch = sample_batch(6, 3);
  const auto perms = identity_perms(batch);
  const BatchGradient bg = meta_gradient(c, s.params, s.cluster, batch, perms);
  double q = 0.0, r = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Graph g;
    const VarMap vars = VarMap::bind(g, s.params);
    TaskOptions o;
    o.permutations.push_back(perms[i]);
    const TaskResult tr = task_step(c, s.cluster, vars, batch[i], o);
    q += tr.query_loss.value().item();
    r += tr.recon_loss.value().item();
    CHECK(tr.objective.value().item() ==
          tr.query_loss.value().item() + c.recon_weight * tr.recon_loss.value().item());
  }
  CHECK(close(bg.query_loss, q / 3.0, 1e-14, 0.0));
  CHECK(close(bg.recon_loss, r / 3.0, 1e-14, 0.0));
}

TEST_CASE("meta-gradient matches finite differences of the full objective",
          "[trainer][property]") {
  for (Mode mode : {Mode::Hsml, Mode::Maml}) {
    TrainerConfig c = small_config(mode);
    c.arch.hidden = Activation::Tanh;
    c.alpha = 0.05;
    const TrainState s = init_state(c);
    const auto batch = sample_batch(7, 2);
    const auto perms = mode == Mode::Hsml ? identity_perms(batch)
                                          : std::vector<std::vector<std::size_t>>{};
    const BatchGradient bg = meta_gradient(c, s.params, s.cluster, batch, perms);
    Rng rng(8);
    std::size_t failures = 0;
    std::size_t checked = 0;
    for (const auto& [name, tensor] : s.params) {
      const std::size_t samples = mode == Mode::Maml ? 10 : 2;
      for (std::size_t k = 0; k < samples; ++k) {
        const std::size_t i = rng.below(tensor.size());
        auto f = [&, n = name](const ad::Tensor& t) {
          ParamSet q = s.params;
          q[n] = t;
          return batch_objective(c, q, s.cluster, batch, perms);
        };
        const double fd = testing::central_difference(f, tensor, i);
        ++checked;
        if (!close(bg.grads.at(name)[i], fd, 1e-3, 1e-7)) {
          ++failures;
          WARN(name << "[" << i << "] analytic " << bg.grads.at(name)[i] << " fd " << fd);
        }
      }
    }
    INFO(checked << " coordinates");
    CHECK(failures == 0);
  }
}

TEST_CASE("training is deterministic for a seed", "[trainer][property]") {
  TrainerConfig c = small_config(Mode::Hsml);
  c.iterations = 4;
  TrainState a = init_state(c);
  TrainState b = init_state(c);
  std::vector<double> la, lb;
  train(c, a, [&](const StepMetrics& m) { la.push_back(m.query_loss); });
  train(c, b, [&](const StepMetrics& m) { lb.push_back(m.query_loss); });
  CHECK(la == lb);
  CHECK(a.params == b.params);
  CHECK(a.iteration == 4);

  c.seed = 2;
  TrainState other = init_state(c);
  train(c, other);
  CHECK(other.params != a.params);
}

TEST_CASE("expansion during training grows the first level", "[trainer]") {
  TrainerConfig c = small_config(Mode::Hsml);
  c.window = 1;
  c.expansion = true;
  c.expansion_threshold = 1e-9;  // every closed window after the first fires
  c.iterations = 3;
  TrainState s = init_state(c);
  std::vector<bool> expanded;
  train(c, s, [&](const StepMetrics& m) { expanded.push_back(m.expanded); });
  CHECK(expanded == std::vector<bool>{false, true, true});
  CHECK(s.expansions == std::vector<std::size_t>{1, 2});
  CHECK(s.cluster.sizes == std::vector<std::size_t>{5, 2, 1});
  CHECK(s.params.at(center_name(0)).shape() == ad::Shape{5, 6});
  CHECK(s.adam.first_moment.at(center_name(0)).shape() == ad::Shape{5, 6});
  CHECK(s.window_means.size() == 3);

  // Disabled expansion and MAML never grow.
  c.expansion = false;
  TrainState fixed = init_state(c);
  train(c, fixed);
  CHECK(fixed.expansions.empty());
}

TEST_CASE("diverging inner loops raise a training error naming the family", "[trainer]") {
  TrainerConfig c = small_config(Mode::Maml);
  c.alpha = 1e200;
  c.inner_steps_train = 3;
  TrainState s = init_state(c);
  try {
    meta_step(c, s, sample_batch(9, 1));
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    bool named = false;
    for (Family f : kAllFamilies) named |= msg.find(family_name(f)) != std::string::npos;
    CHECK(named);
  }
}

TEST_CASE("summary statistics", "[trainer]") {
  const FamilyStats one = summarize("x", {2.5});
  CHECK(one.mean == 2.5);
  CHECK_FALSE(one.ci95.has_value());
  const FamilyStats three = summarize("x", {1.0, 2.0, 3.0});
  CHECK(three.mean == 2.0);
  REQUIRE(three.ci95.has_value());
  CHECK(close(*three.ci95, 1.96 / std::sqrt(3.0), 1e-15, 0.0));
  CHECK(summarize("empty", {}).count == 0);
}

TEST_CASE("a perfect predictor scores zero", "[trainer]") {
  EvalOptions o;
  o.n_tasks = 40;
  const auto tasks = evaluation_tasks(o);
  const EvalReport r = evaluate_predictor(tasks, 5, [](const Task& t) {
    std::vector<double> out;
    for (double x : t.query.x) out.push_back(evaluate_truth(t, x));
    return out;
  });
  CHECK(r.overall.mean == 0.0);
  CHECK(r.overall.count == 40);
  std::size_t total = 0;
  for (std::size_t i = 0; i < r.families.size(); ++i) {
    CHECK(r.families[i].mean == 0.0);
    total += r.families[i].count;
    if (i > 0) CHECK(parse_family(r.families[i - 1].name) < parse_family(r.families[i].name));
  }
  CHECK(total == 40);
}

TEST_CASE("evaluation tasks and reports are reproducible", "[trainer][property]") {
  EvalOptions o;
  o.n_tasks = 6;
  o.query_size = 20;
  const auto a = evaluation_tasks(o);
  const auto b = evaluation_tasks(o);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].coefficients == b[i].coefficients);
    CHECK(a[i].query.x == b[i].query.x);
  }
  const TrainerConfig c = small_config(Mode::Hsml);
  const TrainState s = init_state(c);
  const EvalReport r1 = evaluate(c, s.params, s.cluster, o);
  const EvalReport r2 = evaluate(c, s.params, s.cluster, o);
  CHECK(r1.overall.mean == r2.overall.mean);
  REQUIRE(r1.tasks.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(r1.tasks[i].mse == r2.tasks[i].mse);
    REQUIRE(r1.tasks[i].assignment.size() == 3);
    double row = 0.0;
    for (double v : r1.tasks[i].assignment) row += v;
    CHECK(std::abs(row - 1.0) <= 1e-12);
  }
  const EvalReport m = evaluate(small_config(Mode::Maml), init_state(small_config(Mode::Maml)).params,
                                s.cluster, o);
  CHECK(m.tasks.front().assignment.empty());
}

TEST_CASE("evaluation adapts with the test step count", "[trainer]") {
  TrainerConfig c = small_config(Mode::Maml);
  c.alpha = 0.0;
  const TrainState s = init_state(c);
  const Task task = sample_batch(10, 1).front();
  const TaskAnalysis a = analyze_task(c, s.params, s.cluster, task, task.query.x, 1);
  CHECK(a.gated_init == s.params.at(kTheta0));
  ad::Graph g;
  const auto direct = forward(c.arch, g.leaf(s.params.at(kTheta0)),
                              g.leaf(ad::Tensor({task.query.size(), 1}, task.query.x)))
                          .value()
                          .data();
  CHECK(a.predictions == std::vector<double>(direct.begin(), direct.end()));
}
