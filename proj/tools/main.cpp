// Copyright 2026 The selfheal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "selfheal/error.hpp"
#include "selfheal/harness.hpp"

namespace fs = std::filesystem;
using namespace selfheal;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

// Remembers every file a command writes so a failed command leaves nothing
// half-finished behind.
class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)), madeDir_(!fs::exists(dir_)) {}

  const fs::path& dir() const { return dir_; }

  std::ofstream open(const std::string& rel) {
    const fs::path p = dir_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + p.parent_path().string() + "': " + ec.message());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    files_.push_back(p);
    return out;
  }
  void track(const std::vector<std::string>& paths) {
    for (const auto& p : paths) files_.emplace_back(p);
  }
  void rollback() noexcept {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (madeDir_) fs::remove_all(dir_, ec);
  }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool madeDir_;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output.dir = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  validate(cfg);
  return cfg;
}

void write_file(Artifacts& a, const std::string& rel, const std::string& text) {
  std::ofstream out = a.open(rel);
  out << text;
  if (!out.flush()) throw IoError("write failed for '" + (a.dir() / rel).string() + "'");
}

void cmd_simulate(const RunConfig& cfg, Artifacts& a, std::size_t ticks) {
  const Simulation sim = simulate(cfg);
  {
    std::ostringstream s;
    write_graph(s, sim.graph);
    write_file(a, "graph.json", s.str());
  }
  std::uint64_t k = 0;
  auto dump = [&](const WorkloadPattern& p) {
    std::ostringstream s;
    write_trace_csv(s, generate_trace(p, derive_seed(stage_seed(cfg, "simulator"), k++), ticks));
    write_file(a, "traces/" + p.patternId + ".csv", s.str());
  };
  for (const auto& p : sim.trainPatterns) dump(p);
  for (const auto& p : sim.heldOutPatterns) dump(p);
  dump(sim.envPattern);
  std::printf("simulate: %zu traces, graph of %zu nodes, %zu + %zu cascades\n",
              sim.trainPatterns.size() + sim.heldOutPatterns.size() + 1, sim.graph.size(),
              sim.trainCascades.size(), sim.heldOutCascades.size());
}

void cmd_train_detector(const RunConfig& cfg, Artifacts& a) {
  const Simulation sim = simulate(cfg);
  const DetectorStage d = run_detector_stage(cfg, sim);
  std::ostringstream s;
  save_checkpoint(s, d.trained);
  write_file(a, "detector.ckpt", s.str());
  const DetectionSummary sum = summarize_detection(d);
  std::printf("train-detector: meta loss %.4g -> %.4g, held-out F1 %.4g (random init %.4g)\n",
              sum.initialMetaLoss, sum.finalMetaLoss, sum.f1, sum.baselineF1);
}

void cmd_train_gnn(const RunConfig& cfg, Artifacts& a) {
  const Simulation sim = simulate(cfg);
  const GnnStage g = run_gnn_stage(cfg, sim);
  std::ostringstream s;
  save_gnn(s, g.train.params);
  write_file(a, "gnn.txt", s.str());
  const DependencySummary sum = summarize_dependency(g);
  std::printf("train-gnn: loss %.4g -> %.4g, held-out accuracy %.4g, early warning on %.4g\n",
              sum.initialLoss, sum.finalLoss, sum.accuracy, sum.mttfpDefinedFraction);
}

void cmd_train_agent(const RunConfig& cfg, Artifacts& a) {
  const Simulation sim = simulate(cfg);
  const AgentStage ag = run_agent_stage(cfg, sim);
  std::ostringstream s;
  write_policy(s, ag.train.policy);
  write_file(a, "policy.txt", s.str());
  const Normalizers& n = ag.train.policy.normalizers;
  std::printf("train-agent: weighted objective %.4g (random %.4g, no_op %.4g)\n",
              weighted_objective(ag.proposed, ag.weights, n),
              weighted_objective(ag.random, ag.weights, n),
              weighted_objective(ag.noop, ag.weights, n));
}

void cmd_sweep(const RunConfig& cfg, Artifacts& a) {
  const Simulation sim = simulate(cfg);
  const SweepResult r = run_sweep_stage(cfg, sim);
  std::ostringstream s;
  s << "w1,w2,w3,o1,o2,o3,front\n";
  char line[256];
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    bool front = false;
    for (std::size_t f : r.front) front = front || f == i;
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", p.weights.w1,
                  p.weights.w2, p.weights.w3, p.objectives.o1, p.objectives.o2, p.objectives.o3,
                  front ? 1 : 0);
    s << line;
  }
  write_file(a, "sweep.csv", s.str());
  std::printf("sweep: %zu points, %zu on the front\n", r.points.size(), r.front.size());
}

void cmd_run(const RunConfig& cfg, Artifacts& a) {
  const RunReport r = run_pipeline(cfg);
  a.track(emit_report(r, a.dir().string(), cfg.output.json, cfg.output.markdown));
  std::printf("run: F1 %.4g, node accuracy %.4g, weighted improvement %.4g%%\n", r.detection.f1,
              r.dependency.accuracy, r.recovery.weightedImprovementPct);
}

void cmd_report(const std::string& from, const RunConfig& cfg, Artifacts& a) {
  std::ifstream in(from, std::ios::binary);
  if (!in) throw IoError("cannot open '" + from + "'");
  std::ostringstream s;
  s << in.rdbuf();
  const RunReport r = report_from_json(s.str());
  a.track(emit_report(r, a.dir().string(), cfg.output.json, cfg.output.markdown));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selfheal: self-healing database laboratory"};
  app.require_subcommand(1);
  Options opt;
  auto common = [&opt](CLI::App* c) {
    c->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    c->add_option("--seed", opt.seed, "root seed, overrides the config");
    c->add_option("--out", opt.out, "output directory, overrides the config");
    c->add_option("--threads", opt.threads, "worker threads (results do not depend on it)");
  };
  std::size_t ticks = 1000;
  bool printConfig = false;
  std::string from;

  CLI::App* simulateCmd = app.add_subcommand("simulate", "emit workload traces and the component graph");
  simulateCmd->add_option("--ticks", ticks, "trace length per pattern")->check(CLI::PositiveNumber);
  CLI::App* detCmd = app.add_subcommand("train-detector", "meta-train the anomaly detector");
  CLI::App* gnnCmd = app.add_subcommand("train-gnn", "train the cascade predictor");
  CLI::App* agentCmd = app.add_subcommand("train-agent", "train the recovery agent");
  CLI::App* runCmd = app.add_subcommand("run", "full pipeline and report");
  runCmd->add_flag("--print-config", printConfig, "print the resolved config and exit");
  CLI::App* reportCmd = app.add_subcommand("report", "re-emit a report from its JSON file");
  reportCmd->add_option("--from", from, "report.json to re-emit")->required()->check(CLI::ExistingFile);
  CLI::App* sweepCmd = app.add_subcommand("sweep", "weight grid and Pareto front");
  for (CLI::App* c : {simulateCmd, detCmd, gnnCmd, agentCmd, runCmd, reportCmd, sweepCmd}) common(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  RunConfig cfg;
  try {
    cfg = resolve(opt);
  } catch (const Error& e) {
    std::cerr << "selfheal: " << e.what() << "\n";
    return kExitConfig;
  }
  if (printConfig) {
    std::cout << config_to_json(cfg);
    return 0;
  }

  Artifacts artifacts(cfg.output.dir);
  try {
    if (*simulateCmd) cmd_simulate(cfg, artifacts, ticks);
    else if (*detCmd) cmd_train_detector(cfg, artifacts);
    else if (*gnnCmd) cmd_train_gnn(cfg, artifacts);
    else if (*agentCmd) cmd_train_agent(cfg, artifacts);
    else if (*runCmd) cmd_run(cfg, artifacts);
    else if (*reportCmd) cmd_report(from, cfg, artifacts);
    else if (*sweepCmd) cmd_sweep(cfg, artifacts);
  } catch (const ConfigError& e) {
    artifacts.rollback();
    std::cerr << "selfheal: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    artifacts.rollback();
    std::cerr << "selfheal: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
