// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/harness/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hsml::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest text that round-trips; keeps the CSV outputs bit-faithful.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void require_valid(const RunConfig& config) {
  std::vector<std::string> errors = config.trainer.validate();
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

class MetricsCsv {
 public:
  // A resumed run appends so the file keeps one row per iteration overall.
  MetricsCsv(const fs::path& path, bool append) {
    const bool fresh = !append || !fs::exists(path) || fs::file_size(path) == 0;
    out_.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    if (fresh) out_ << "iteration,query_loss,recon_loss,clusters,grad_norm,expanded\n" << std::flush;
  }

  void write(const StepMetrics& m) {
    out_ << m.iteration << ',' << fmt(m.query_loss) << ',' << fmt(m.recon_loss) << ','
         << m.clusters << ',' << fmt(m.grad_norm) << ',' << (m.expanded ? 1 : 0) << '\n'
         << std::flush;
  }

 private:
  std::ofstream out_;
};

json stats_json(const FamilyStats& s) {
  return {{"family", s.name},
          {"count", s.count},
          {"mean_mse", s.mean},
          {"ci95", s.ci95 ? json(*s.ci95) : json(nullptr)}};
}

FamilySet schedule_families(const StreamSchedule& schedule) {
  FamilySet all;
  for (const StreamStage& stage : schedule.stages) all.insert(stage.families.begin(), stage.families.end());
  return all;
}

void write_report(const EvalReport& report, const fs::path& dir) {
  write_text(dir / "eval.json", to_json(report).dump(2) + "\n");
  write_text(dir / "families.csv", families_csv(report));
}

void write_analysis(const Checkpoint& checkpoint, const EvalOptions& options, const fs::path& dir) {
  const TrainerConfig& config = checkpoint.config.trainer;
  const TrainState& state = checkpoint.state;
  const std::vector<Task> tasks = evaluation_tasks(options);
  const std::uint64_t perm_base =
      derive_seed(options.seed, static_cast<std::uint64_t>(Stream::Permutations));

  constexpr std::size_t kGridPoints = 200;
  std::vector<double> grid(kGridPoints);
  for (std::size_t i = 0; i < kGridPoints; ++i) {
    grid[i] = kInputLo + (kInputHi - kInputLo) * static_cast<double>(i) /
                             static_cast<double>(kGridPoints - 1);
  }

  std::ostringstream assignments;
  std::ostringstream gated;
  json curves = json::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& task = tasks[i];
    const TaskAnalysis a =
        analyze_task(config, state.params, state.cluster, task, grid, derive_seed(perm_base, i));
    const std::string family(family_name(task.family));
    if (i == 0) {
      assignments << "task,family";
      for (std::size_t k = 0; k < a.assignment.size(); ++k) assignments << ",cluster_" << k;
      assignments << '\n';
      gated << "task,family";
      for (std::size_t k = 0; k < a.gated_init.size(); ++k) gated << ",theta_" << k;
      gated << '\n';
    }
    assignments << i << ',' << family;
    for (double v : a.assignment) assignments << ',' << fmt(v);
    assignments << '\n';
    gated << i << ',' << family;
    for (double v : a.gated_init.data()) gated << ',' << fmt(v);
    gated << '\n';

    std::vector<double> truth;
    truth.reserve(grid.size());
    for (double x : grid) truth.push_back(evaluate_truth(task, x));
    json entry = to_json(task);
    entry.erase("query");
    entry["task"] = i;
    entry["grid"] = grid;
    entry["truth"] = truth;
    entry["prediction"] = a.predictions;
    curves.push_back(std::move(entry));
  }
  write_text(dir / "assignments.csv", assignments.str());
  write_text(dir / "gated_init.csv", gated.str());
  write_text(dir / "curves.json", curves.dump(1) + "\n");
}

}  // namespace

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) {
    throw std::runtime_error("output directory " + dir.string() +
                             " is in use (remove " + path_.string() + " if no run is active)");
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

TrainOutcome cmd_train(const RunConfig& config, std::optional<Checkpoint> resume,
                       std::ostream* log) {
  require_valid(config);
  const TrainerConfig& tc = config.trainer;
  const fs::path dir(config.out_dir);
  OutputLock lock(dir);

  TrainOutcome out;
  if (resume) {
    check_compatible(tc, resume->state);
    out.state = std::move(resume->state);
  } else {
    out.state = init_state(tc);
  }
  TrainState& state = out.state;
  save_config((dir / "config.json").string(), config);
  MetricsCsv metrics(dir / "metrics.csv", resume.has_value());
  std::ofstream eval_history;
  auto checkpoint = [&] { save_checkpoint((dir / kCheckpointFile).string(), {config, state}); };

  while (state.iteration < tc.iterations) {
    // meta_step only throws before touching parameters, so restoring the
    // generators is enough to recover the last good state.
    const Rng task_rng = state.task_rng;
    const Rng perm_rng = state.perm_rng;
    StepMetrics m;
    try {
      m = train_iteration(tc, state);
    } catch (const TrainingError& e) {
      state.task_rng = task_rng;
      state.perm_rng = perm_rng;
      checkpoint();
      const json report = {{"iteration", state.iteration}, {"error", e.what()},
                           {"checkpoint", kCheckpointFile}};
      write_text(dir / "error.json", report.dump(2) + "\n");
      if (log) *log << "training failed at iteration " << state.iteration << ": " << e.what() << '\n';
      out.failed = true;
      out.error = e.what();
      return out;
    }
    metrics.write(m);
    if (config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0) checkpoint();
    if (config.eval_every > 0 && state.iteration % config.eval_every == 0) {
      EvalOptions options;
      options.families = schedule_families(tc.schedule);
      options.n_tasks = config.eval_tasks;
      options.shots = tc.shots;
      options.seed = tc.seed;
      const EvalReport r = evaluate(tc, state.params, state.cluster, options);
      if (!eval_history.is_open()) {
        const fs::path path = dir / "eval_history.csv";
        const bool fresh = !fs::exists(path);
        eval_history.open(path, std::ios::app);
        if (fresh) eval_history << "iteration,mean_mse,ci95\n";
      }
      eval_history << state.iteration << ',' << fmt(r.overall.mean) << ','
                   << (r.overall.ci95 ? fmt(*r.overall.ci95) : "NA") << '\n'
                   << std::flush;
      if (log) *log << "iteration " << state.iteration << " eval mse " << r.overall.mean << '\n';
    }
    if (log && state.iteration % 100 == 0) {
      *log << "iteration " << state.iteration << " query loss " << m.query_loss << " clusters "
           << state.cluster.sizes.front() << '\n';
    }
  }
  checkpoint();
  if (config.export_analysis) {
    EvalOptions options;
    options.families = schedule_families(tc.schedule);
    options.n_tasks = config.eval_tasks;
    options.shots = tc.shots;
    options.seed = tc.seed;
    write_analysis({config, state}, options, dir);
  }
  return out;
}

json to_json(const EvalReport& report) {
  json families = json::array();
  for (const FamilyStats& s : report.families) families.push_back(stats_json(s));
  json tasks = json::array();
  for (const TaskEval& t : report.tasks) {
    tasks.push_back({{"family", family_name(t.family)}, {"mse", t.mse}, {"assignment", t.assignment}});
  }
  return {{"shots", report.shots},
          {"n_tasks", report.tasks.size()},
          {"overall", stats_json(report.overall)},
          {"families", families},
          {"tasks", tasks}};
}

std::string families_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "family,mean_mse,ci95,count\n";
  auto row = [&](const FamilyStats& s) {
    out << s.name << ',' << fmt(s.mean) << ',' << (s.ci95 ? fmt(*s.ci95) : "NA") << ',' << s.count
        << '\n';
  };
  for (const FamilyStats& s : report.families) row(s);
  row(report.overall);
  return out.str();
}

EvalReport cmd_eval(const Checkpoint& checkpoint, const EvalOptions& options,
                    const fs::path& out_dir) {
  OutputLock lock(out_dir);
  const EvalReport report =
      evaluate(checkpoint.config.trainer, checkpoint.state.params, checkpoint.state.cluster, options);
  write_report(report, out_dir);
  return report;
}

ContinualVariant parse_variant(const std::string& text) {
  if (text == "dynamic") return {};
  const std::string prefix = "static-";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size()) {
    const std::string digits = text.substr(prefix.size());
    if (digits.find_first_not_of("0123456789") == std::string::npos) {
      const std::size_t k = std::stoul(digits);
      if (k >= 1) return {false, k};
    }
  }
  throw std::invalid_argument("variant: expected 'dynamic' or 'static-K' with K >= 1, got '" +
                              text + "'");
}

std::string variant_name(const ContinualVariant& v) {
  return v.dynamic ? "dynamic" : "static-" + std::to_string(v.static_clusters);
}

ContinualOutcome cmd_continual(const RunConfig& config, const ContinualVariant& variant,
                               std::ostream* log) {
  RunConfig run = config;
  TrainerConfig& tc = run.trainer;
  tc.expansion = variant.dynamic;
  if (!variant.dynamic) tc.cluster.sizes.front() = variant.static_clusters;
  require_valid(run);
  if (tc.mode != Mode::Hsml) throw ConfigError({"mode: continual training needs mode hsml"});

  const fs::path dir(run.out_dir);
  OutputLock lock(dir);
  save_config((dir / "config.json").string(), run);
  MetricsCsv metrics(dir / "metrics.csv", false);

  ContinualOutcome out;
  out.state = init_state(tc);
  out.result = continual_train(tc, out.state, [&](const StepMetrics& m) {
    metrics.write(m);
    if (log && m.expanded) {
      *log << "iteration " << m.iteration << ": expanded to " << m.clusters << " clusters\n";
    }
  });

  std::ostringstream curve;
  curve << "window,end_iteration,mean_loss,clusters\n";
  for (std::size_t w = 0; w < out.result.window_means.size(); ++w) {
    curve << w << ',' << (w + 1) * tc.window - 1 << ',' << fmt(out.result.window_means[w]) << ','
          << out.result.window_clusters[w] << '\n';
  }
  write_text(dir / "loss_curve.csv", curve.str());
  save_checkpoint((dir / kCheckpointFile).string(), {run, out.state});

  EvalOptions options;
  options.families = schedule_families(tc.schedule);
  options.n_tasks = run.eval_tasks;
  options.shots = tc.shots;
  options.seed = tc.seed;
  out.report = evaluate(tc, out.state.params, out.state.cluster, options);
  write_report(out.report, dir);
  return out;
}

void cmd_export_analysis(const Checkpoint& checkpoint, const EvalOptions& options,
                         const fs::path& out_dir) {
  OutputLock lock(out_dir);
  write_analysis(checkpoint, options, out_dir);
}

SimilarityReport assignment_similarity(const TrainerConfig& config, const ParamSet& params,
                                       const ClusterConfig& cluster,
                                       std::size_t tasks_per_family, std::size_t shots,
                                       std::uint64_t seed) {
  if (config.mode != Mode::Hsml) {
    throw std::invalid_argument("assignment_similarity: needs an hsml model");
  }
  const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(Stream::Eval));
  const std::uint64_t perm_base = derive_seed(seed, static_cast<std::uint64_t>(Stream::Permutations));
  std::vector<std::vector<double>> vectors;
  std::vector<Family> labels;
  for (Family family : kAllFamilies) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(family) + 1));
    for (std::size_t i = 0; i < tasks_per_family; ++i) {
      const Task task = sample_task_of_family(rng, family, shots, 1);
      const TaskAnalysis a =
          analyze_task(config, params, cluster, task, task.query.x,
                       derive_seed(perm_base, vectors.size()));
      vectors.push_back(a.assignment);
      labels.push_back(family);
    }
  }
  double intra = 0.0;
  double inter = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      double dot = 0.0;
      double na = 0.0;
      double nb = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) {
        dot += vectors[i][k] * vectors[j][k];
        na += vectors[i][k] * vectors[i][k];
        nb += vectors[j][k] * vectors[j][k];
      }
      const double cosine = dot / std::sqrt(na * nb);
      if (labels[i] == labels[j]) {
        intra += cosine;
        ++n_intra;
      } else {
        inter += cosine;
        ++n_inter;
      }
    }
  }
  SimilarityReport r;
  if (n_intra > 0) r.intra = intra / static_cast<double>(n_intra);
  if (n_inter > 0) r.inter = inter / static_cast<double>(n_inter);
  return r;
}

}  // namespace hsml::harness
