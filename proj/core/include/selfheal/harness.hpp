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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfheal/depgraph.hpp"
#include "selfheal/detector.hpp"
#include "selfheal/explain.hpp"
#include "selfheal/recovery.hpp"
#include "selfheal/simulator.hpp"

namespace selfheal {

std::string version_string();

// ---------------------------------------------------------------- config

struct SimulatorSection {
  std::size_t trainPatterns = 24;
  std::size_t heldOutPatterns = 10;
  double anomalyRate = 0.1;
  std::size_t windowW = 4;
  std::size_t nSupport = 10;
  std::size_t nQuery = 20;
  double jitterStd = 0.02;
  std::size_t mixCount = 8;
  GraphSpec graph;
  double thresholdC = 0.5;
};

struct DetectorSection {
  MetaConfig meta;
  std::vector<std::size_t> hidden{32, 16};
  double threshold = 0.5;
};

struct GnnSection {
  GnnArch arch;
  std::size_t epochs = 300;
  double lr = 0.1;
  std::size_t trainCascades = 200;
  std::size_t heldOutCascades = 50;
  std::size_t horizon = 12;
  double tauG = 0.5;
};

struct AgentSection {
  AgentHyper hyper;
  std::size_t episodes = 3000;
  RewardWeights weights;
  Priority priority = Priority::balanced;
  std::vector<RewardWeights> grid{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                                  {0.6, 0.2, 0.2},
                                  {0.2, 0.6, 0.2},
                                  {0.2, 0.2, 0.6},
                                  {0.8, 0.1, 0.1}};
  EnvConfig env;
};

struct EvalSection {
  std::size_t episodes = 100;           // held-out recovery episodes
  std::size_t closedLoopEpisodes = 20;  // of those, run through detect -> predict -> act
  double tickSeconds = 1.0;
  std::size_t attributions = 5;         // attribution records kept in the report
  std::size_t backgroundSize = 16;
};

struct OutputSection {
  std::string dir = "out";
  bool json = true;
  bool markdown = true;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::size_t threads = 1;  // never changes results
  SimulatorSection simulator;
  DetectorSection detector;
  GnnSection gnn;
  AgentSection agent;
  EvalSection eval;
  OutputSection output;
};

// Throws ConfigError on any invalid value.
void validate(const RunConfig& cfg);

// JSON text with sections simulator / detector / gnn / agent / eval /
// output plus top-level seed and threads. Missing keys keep their defaults;
// unknown keys raise ConfigError naming the dotted path.
RunConfig parse_config(const std::string& jsonText);
RunConfig load_config(const std::string& path);
// Fully resolved config as pretty-printed JSON.
std::string config_to_json(const RunConfig& cfg);
// FNV-1a of the canonical config JSON, excluding threads and output.
std::uint64_t config_hash(const RunConfig& cfg);

// Named substream of the root seed ("simulator", "detector", "gnn", "agent", "eval").
std::uint64_t stage_seed(const RunConfig& cfg, const char* stage);

// ---------------------------------------------------------------- stages

struct Simulation {
  std::vector<WorkloadPattern> trainPatterns;
  std::vector<WorkloadPattern> heldOutPatterns;
  std::vector<Task> trainTasks;  // after augmentation
  std::vector<Task> heldOutTasks;
  ComponentGraph graph;          // graph of the recovery environment
  WorkloadPattern envPattern;
  std::vector<CascadeTrace> trainCascades;
  std::vector<CascadeTrace> heldOutCascades;
};

Simulation simulate(const RunConfig& cfg);

struct AdaptationRow {
  std::string task;
  std::size_t stepsProposed = 0;
  std::size_t stepsBaseline = 0;
  bool operator==(const AdaptationRow&) const = default;
};

// Adaptation-step measurement for both initialisations on identical tasks.
std::vector<AdaptationRow> compare_adaptation(const DetectorModel& metaModel,
                                              const DetectorModel& baselineInit,
                                              const std::vector<Task>& tasks,
                                              const MetaConfig& cfg);

struct DetectorStage {
  DetectorModel init;      // random init, also the baseline
  DetectorModel trained;
  MetaTrainResult train;
  std::vector<EvalReport> proposed;  // one per held-out task
  std::vector<EvalReport> baseline;
};

DetectorStage run_detector_stage(const RunConfig& cfg, const Simulation& sim);

struct GnnStage {
  GnnTrainResult train;
  std::vector<CascadeScore> scores;      // held-out
  std::vector<std::optional<double>> mttfp;
};

GnnStage run_gnn_stage(const RunConfig& cfg, const Simulation& sim);

struct AgentStage {
  TrainAgentResult train;
  RewardWeights weights;  // after dynamic_weights
  std::vector<std::uint64_t> evalSeeds;
  ObjectiveVector proposed, random, noop;
};

DatabaseRecoveryEnv make_env(const RunConfig& cfg, const Simulation& sim);
AgentStage run_agent_stage(const RunConfig& cfg, const Simulation& sim);
SweepResult run_sweep_stage(const RunConfig& cfg, const Simulation& sim);

// ---------------------------------------------------------------- report

struct DetectionSummary {
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // mean over held-out tasks
  double baselinePrecision = 0.0, baselineRecall = 0.0, baselineF1 = 0.0;
  Confusion confusion;
  Confusion baselineConfusion;
  std::size_t tasks = 0;
  double initialMetaLoss = 0.0, finalMetaLoss = 0.0;
  bool operator==(const DetectionSummary&) const = default;
};

struct AdaptationSummary {
  std::vector<AdaptationRow> rows;
  double medianProposed = 0.0, medianBaseline = 0.0;
  bool operator==(const AdaptationSummary&) const = default;
};

struct DependencySummary {
  double accuracy = 0.0;
  std::optional<double> mttfpSeconds;  // mean over cascades where defined
  double mttfpDefinedFraction = 0.0;
  double falseAlarmRate = 0.0, missRate = 0.0, lateRate = 0.0;
  std::size_t cascades = 0;
  double initialLoss = 0.0, finalLoss = 0.0;
  bool operator==(const DependencySummary&) const = default;
};

struct RecoveryRow {
  std::string policy;  // proposed, random_policy, no_op_policy, closed_loop
  ObjectiveVector objectives;
  double weighted = 0.0;
  bool operator==(const RecoveryRow&) const = default;
};

struct RecoverySummary {
  RewardWeights weights;
  Normalizers normalizers;
  std::size_t episodes = 0;
  std::vector<RecoveryRow> rows;
  // 100 * (random - proposed) / random, per objective and for the weighted sum.
  double latencyImprovementPct = 0.0, resourceImprovementPct = 0.0, costImprovementPct = 0.0;
  double weightedImprovementPct = 0.0;
  double closedLoopStateAccuracy = 0.0;  // inferred anomaly status == true status
  bool operator==(const RecoverySummary&) const = default;
};

struct ParetoSummary {
  std::vector<SweepPoint> points;
  std::vector<std::size_t> front;
  bool operator==(const ParetoSummary&) const = default;
};

struct RankedActionRecord {
  std::string action;
  double q = 0.0, gap = 0.0;
  bool operator==(const RankedActionRecord&) const = default;
};

struct AttributionRecord {
  std::size_t episode = 0, tick = 0;
  double score = 0.0;
  std::vector<std::string> groups;
  std::vector<double> phi;
  double baseValue = 0.0, instanceValue = 0.0;
  std::string inferredState, trueState, action;
  std::vector<RankedActionRecord> ranking;
  bool operator==(const AttributionRecord&) const = default;
};

struct Provenance {
  std::string configHash;  // 16 hex digits
  std::uint64_t seed = 0;
  std::string version;
  bool operator==(const Provenance&) const = default;
};

struct RunReport {
  DetectionSummary detection;
  AdaptationSummary adaptation;
  DependencySummary dependency;
  RecoverySummary recovery;
  ParetoSummary pareto;
  std::vector<AttributionRecord> attributions;
  Provenance provenance;
  bool operator==(const RunReport&) const = default;
};

DetectionSummary summarize_detection(const DetectorStage& d);
AdaptationSummary summarize_adaptation(std::vector<AdaptationRow> rows);
DependencySummary summarize_dependency(const GnnStage& g);

// Full pipeline: simulate, meta-train, train the GNN, train the agent,
// sweep, then closed-loop episodes (detect, predict on anomaly, act).
// Stage failures are rethrown as StageError.
RunReport run_pipeline(const RunConfig& cfg);

std::string report_to_json(const RunReport& r);
RunReport report_from_json(const std::string& text);
// Tables for detection, adaptation, dependency, recovery and the Pareto
// sweep; numbers carry 4 significant digits.
std::string report_to_markdown(const RunReport& r);

// Writes report.json and/or report.md into dir (created if missing) and
// returns the written paths. IoError names the failing path.
std::vector<std::string> emit_report(const RunReport& r, const std::string& dir, bool json,
                                     bool markdown);

// Median of a list of counts; 0 for an empty list.
double median(std::vector<std::size_t> v);

}  // namespace selfheal
