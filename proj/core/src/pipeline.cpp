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

#include <algorithm>
#include <cstdio>

#include "selfheal/error.hpp"
#include "selfheal/harness.hpp"
#include "selfheal/parallel.hpp"
#include "selfheal/rng.hpp"

#ifndef SELFHEAL_VERSION
#define SELFHEAL_VERSION "0.0.0"
#endif

namespace selfheal {

std::string version_string() { return SELFHEAL_VERSION; }

double median(std::vector<std::size_t> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return static_cast<double>(v[n / 2]);
  return 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

namespace {

std::vector<WorkloadPattern> patterns(const std::string& prefix, std::size_t n, std::uint64_t seed,
                                      double rate) {
  std::vector<WorkloadPattern> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(random_pattern(prefix + std::to_string(i), derive_seed(seed, i), rate));
  }
  return out;
}

std::vector<CascadeTrace> cascades(const RunConfig& cfg, std::size_t n, std::uint64_t seed) {
  std::vector<CascadeTrace> out;
  const std::uint64_t graphs = derive_seed(seed, "graphs");
  const std::uint64_t runs = derive_seed(seed, "runs");
  for (std::size_t i = 0; i < n; ++i) {
    const ComponentGraph g = random_component_graph(cfg.simulator.graph, derive_seed(graphs, i));
    out.push_back(sample_cascade(g, 0, cfg.gnn.horizon, cfg.simulator.thresholdC,
                                 derive_seed(runs, i)));
  }
  return out;
}

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

AnomalyStatus status_for_metric(std::size_t metric) {
  switch (static_cast<Metric>(metric)) {
    case Metric::cpu: return AnomalyStatus::cpu;
    case Metric::memory: return AnomalyStatus::memory;
    case Metric::latency: return AnomalyStatus::lock;
    case Metric::io: return AnomalyStatus::io;
    case Metric::qps: return AnomalyStatus::none;
  }
  return AnomalyStatus::none;
}

double improvement(double baseline, double proposed) {
  return baseline != 0.0 ? 100.0 * (baseline - proposed) / baseline : 0.0;
}

struct ClosedLoop {
  ObjectiveVector objectives;
  double stateAccuracy = 0.0;
  std::vector<AttributionRecord> attributions;
};

ClosedLoop run_closed_loop(const RunConfig& cfg, const Simulation& sim, const DetectorStage& det,
                           const GnnStage& gnn, const AgentStage& agent) {
  ClosedLoop out;
  const std::size_t episodes = cfg.eval.closedLoopEpisodes;
  if (episodes == 0) return out;
  const std::size_t w = cfg.simulator.windowW;
  const std::uint64_t evalSeed = stage_seed(cfg, "eval");
  DatabaseRecoveryEnv env = make_env(cfg, sim);

  // Deployment: adapt the meta-learned detector to the live workload.
  const Task live = make_tasks({sim.envPattern}, cfg.simulator.nSupport, cfg.simulator.nQuery, w,
                               derive_seed(evalSeed, "live-task"))
                        .front();
  DetectorModel detector = det.trained;
  detector.params = inner_adapt(detector.params, detector.layers, live.support,
                                cfg.detector.meta.alpha, cfg.detector.meta.innerSteps);
  std::vector<std::vector<double>> background;
  for (const auto* split : {&live.support, &live.query})
    for (const Example& e : *split)
      if (e.label == 0 && background.size() < cfg.eval.backgroundSize) {
        background.push_back(e.features);
      }
  const FeatureGroups groups = metric_groups(w);
  const auto [lowCut, highCut] = env.load_thresholds();
  const Policy& policy = agent.train.policy;

  std::size_t correct = 0, ticks = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(agent.evalSeeds[e]);
    EpisodeLog log;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const Trace window = env.recent_telemetry(w);
      const std::vector<double> x = window_features(window, w - 1, w);
      const Detection d = detect(detector, x);

      SystemState inferred;
      const double qps = window.back().qps;
      inferred.load = qps <= lowCut ? LoadLevel::low
                      : qps <= highCut ? LoadLevel::medium
                                       : LoadLevel::high;
      std::optional<Attribution> attr;
      if (d.flag) {
        attr = shapley_attribution(detector, x, background, groups);
        inferred.anomaly = status_for_metric(top_group(*attr));
        const FailurePrediction p =
            predict_failures(env.graph(), env.node_snapshot(), gnn.train.params, 1, cfg.gnn.tauG);
        std::size_t flagged = 0;
        for (const auto& f : p.predictedFailTick) flagged += f ? 1 : 0;
        if (flagged > 0) {
          inferred.anomaly = AnomalyStatus::cascade;
          inferred.failed =
              failed_bin(static_cast<double>(flagged) / static_cast<double>(env.graph().size()));
        }
      }
      const SystemState truth = env.true_state();
      correct += inferred.anomaly == truth.anomaly ? 1 : 0;
      ++ticks;
      const ActionKind a = policy.greedy(inferred);

      if (attr && out.attributions.size() < cfg.eval.attributions) {
        AttributionRecord rec;
        rec.episode = e;
        rec.tick = t;
        rec.score = d.score;
        rec.groups = attr->groupNames;
        rec.phi = attr->phi;
        rec.baseValue = attr->baseValue;
        rec.instanceValue = attr->instanceValue;
        rec.inferredState = to_string(inferred);
        rec.trueState = to_string(truth);
        rec.action = to_string(a);
        for (const RankedAction& r : explain_recovery(policy, inferred)) {
          rec.ranking.push_back({to_string(r.action), r.q, r.gap});
        }
        out.attributions.push_back(std::move(rec));
      }

      const StepResult r = env.step(a);
      log.latency.push_back(r.latency);
      log.resource.push_back(r.resource);
      log.actions.push_back(a);
      if (r.done) break;
    }
    const ObjectiveVector o = episode_objectives(log, env.costs());
    out.objectives.o1 += o.o1;
    out.objectives.o2 += o.o2;
    out.objectives.o3 += o.o3;
  }
  const double n = static_cast<double>(episodes);
  out.objectives = {out.objectives.o1 / n, out.objectives.o2 / n, out.objectives.o3 / n};
  out.stateAccuracy = ticks ? static_cast<double>(correct) / static_cast<double>(ticks) : 0.0;
  return out;
}

}  // namespace

Simulation simulate(const RunConfig& cfg) {
  validate(cfg);
  const auto& s = cfg.simulator;
  const std::uint64_t seed = stage_seed(cfg, "simulator");
  Simulation sim;
  sim.trainPatterns = patterns("train-", s.trainPatterns, derive_seed(seed, "train-patterns"),
                               s.anomalyRate);
  sim.heldOutPatterns = patterns("heldout-", s.heldOutPatterns,
                                 derive_seed(seed, "heldout-patterns"), s.anomalyRate);
  sim.trainTasks = augment_tasks(make_tasks(sim.trainPatterns, s.nSupport, s.nQuery, s.windowW,
                                            derive_seed(seed, "train-tasks")),
                                 s.jitterStd, s.mixCount, derive_seed(seed, "augment"));
  sim.heldOutTasks = make_tasks(sim.heldOutPatterns, s.nSupport, s.nQuery, s.windowW,
                                derive_seed(seed, "heldout-tasks"));
  sim.graph = random_component_graph(s.graph, derive_seed(seed, "graph"));
  sim.envPattern = random_pattern("live", derive_seed(seed, "live-pattern"), s.anomalyRate);
  sim.trainCascades = cascades(cfg, cfg.gnn.trainCascades, derive_seed(seed, "train-cascades"));
  sim.heldOutCascades = cascades(cfg, cfg.gnn.heldOutCascades, derive_seed(seed, "heldout-cascades"));
  return sim;
}

std::vector<AdaptationRow> compare_adaptation(const DetectorModel& metaModel,
                                              const DetectorModel& baselineInit,
                                              const std::vector<Task>& tasks,
                                              const MetaConfig& cfg) {
  if (tasks.empty()) throw InputError("compare_adaptation: no tasks");
  return parallel_map(tasks.size(), cfg.threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    AdaptationRow row;
    row.task = t.sourcePatternId;
    row.stepsProposed = adaptation_steps(metaModel.params, metaModel.layers, t.support, cfg.alpha,
                                         cfg.maxAdaptSteps, cfg.convergenceLoss);
    row.stepsBaseline = adaptation_steps(baselineInit.params, baselineInit.layers, t.support,
                                         cfg.alpha, cfg.maxAdaptSteps, cfg.convergenceLoss);
    return row;
  });
}

DetectorStage run_detector_stage(const RunConfig& cfg, const Simulation& sim) {
  const std::uint64_t seed = stage_seed(cfg, "detector");
  MetaConfig meta = cfg.detector.meta;
  meta.threads = cfg.threads;
  DetectorStage out;
  const std::size_t width = cfg.simulator.windowW * kMetricCount;
  out.init = make_detector(width, derive_seed(seed, "init"), cfg.detector.hidden,
                           cfg.detector.threshold);
  out.train = meta_train(out.init, sim.trainTasks, meta, derive_seed(seed, "meta"));
  out.trained = out.train.model;
  out.proposed = parallel_map(sim.heldOutTasks.size(), cfg.threads, [&](std::size_t i) {
    return evaluate(out.trained, sim.heldOutTasks[i], meta);
  });
  out.baseline = parallel_map(sim.heldOutTasks.size(), cfg.threads, [&](std::size_t i) {
    return evaluate(out.init, sim.heldOutTasks[i], meta);
  });
  return out;
}

GnnStage run_gnn_stage(const RunConfig& cfg, const Simulation& sim) {
  const std::uint64_t seed = stage_seed(cfg, "gnn");
  GnnStage out;
  out.train = train_gnn(sim.trainCascades, cfg.gnn.arch, cfg.gnn.epochs, cfg.gnn.lr,
                        derive_seed(seed, "init"));
  for (const CascadeTrace& c : sim.heldOutCascades) {
    const FailurePrediction p =
        predict_failures(c.graph, c.nodeTelemetry, out.train.params, c.horizon(), cfg.gnn.tauG);
    out.scores.push_back(score_prediction(p, c));
    out.mttfp.push_back(mttfp(p, c, cfg.eval.tickSeconds));
  }
  return out;
}

DatabaseRecoveryEnv make_env(const RunConfig& cfg, const Simulation& sim) {
  EnvConfig env = cfg.agent.env;
  env.thresholdC = cfg.simulator.thresholdC;
  return DatabaseRecoveryEnv(sim.envPattern, sim.graph, env);
}

AgentStage run_agent_stage(const RunConfig& cfg, const Simulation& sim) {
  const std::uint64_t seed = stage_seed(cfg, "agent");
  DatabaseRecoveryEnv env = make_env(cfg, sim);
  AgentStage out;
  out.weights = dynamic_weights(cfg.agent.priority, cfg.agent.weights);
  out.train = train_agent(env, out.weights, cfg.agent.episodes, cfg.agent.hyper,
                          derive_seed(seed, "train"));
  out.evalSeeds = episode_seeds(derive_seed(stage_seed(cfg, "eval"), "episodes"), cfg.eval.episodes);
  out.proposed = evaluate_policy(env, greedy_chooser(out.train.policy), out.evalSeeds);
  out.random = evaluate_policy(env, random_chooser(), out.evalSeeds);
  out.noop = evaluate_policy(env, noop_chooser(), out.evalSeeds);
  return out;
}

SweepResult run_sweep_stage(const RunConfig& cfg, const Simulation& sim) {
  DatabaseRecoveryEnv env = make_env(cfg, sim);
  const auto evalSeeds =
      episode_seeds(derive_seed(stage_seed(cfg, "eval"), "episodes"), cfg.eval.episodes);
  return weight_sweep(env, cfg.agent.grid, cfg.agent.episodes, cfg.agent.hyper,
                      derive_seed(stage_seed(cfg, "agent"), "sweep"), evalSeeds, cfg.threads);
}

DetectionSummary summarize_detection(const DetectorStage& d) {
  DetectionSummary s;
  s.tasks = d.proposed.size();
  for (const EvalReport& r : d.proposed) {
    s.precision += r.precision;
    s.recall += r.recall;
    s.f1 += r.f1;
    s.confusion += r.confusion;
  }
  for (const EvalReport& r : d.baseline) {
    s.baselinePrecision += r.precision;
    s.baselineRecall += r.recall;
    s.baselineF1 += r.f1;
    s.baselineConfusion += r.confusion;
  }
  if (s.tasks) {
    const double n = static_cast<double>(s.tasks);
    s.precision /= n;
    s.recall /= n;
    s.f1 /= n;
  }
  if (!d.baseline.empty()) {
    const double n = static_cast<double>(d.baseline.size());
    s.baselinePrecision /= n;
    s.baselineRecall /= n;
    s.baselineF1 /= n;
  }
  s.initialMetaLoss = d.train.initialMetaLoss;
  s.finalMetaLoss = d.train.finalMetaLoss;
  return s;
}

AdaptationSummary summarize_adaptation(std::vector<AdaptationRow> rows) {
  AdaptationSummary s;
  std::vector<std::size_t> p, b;
  for (const auto& r : rows) {
    p.push_back(r.stepsProposed);
    b.push_back(r.stepsBaseline);
  }
  s.medianProposed = median(p);
  s.medianBaseline = median(b);
  s.rows = std::move(rows);
  return s;
}

DependencySummary summarize_dependency(const GnnStage& g) {
  DependencySummary s;
  s.cascades = g.scores.size();
  for (const CascadeScore& c : g.scores) {
    s.accuracy += c.accuracy;
    s.falseAlarmRate += c.falseAlarmRate;
    s.missRate += c.missRate;
    s.lateRate += c.lateRate;
  }
  double lead = 0.0;
  std::size_t defined = 0, early = 0;
  for (const auto& m : g.mttfp) {
    if (!m) continue;
    lead += *m;
    ++defined;
    early += *m > 0.0 ? 1 : 0;
  }
  if (s.cascades) {
    const double n = static_cast<double>(s.cascades);
    s.accuracy /= n;
    s.falseAlarmRate /= n;
    s.missRate /= n;
    s.lateRate /= n;
    s.mttfpDefinedFraction = static_cast<double>(early) / n;
  }
  if (defined) s.mttfpSeconds = lead / static_cast<double>(defined);
  if (!g.train.lossCurve.empty()) {
    s.initialLoss = g.train.lossCurve.front();
    s.finalLoss = g.train.lossCurve.back();
  }
  return s;
}

RunReport run_pipeline(const RunConfig& cfg) {
  validate(cfg);
  RunReport report;
  const Simulation sim = stage("simulate", [&] { return simulate(cfg); });
  const DetectorStage det = stage("train-detector", [&] { return run_detector_stage(cfg, sim); });
  report.detection = summarize_detection(det);
  report.adaptation = stage("adaptation", [&] {
    MetaConfig meta = cfg.detector.meta;
    meta.threads = cfg.threads;
    return summarize_adaptation(compare_adaptation(det.trained, det.init, sim.heldOutTasks, meta));
  });
  const GnnStage gnn = stage("train-gnn", [&] { return run_gnn_stage(cfg, sim); });
  report.dependency = summarize_dependency(gnn);
  const AgentStage agent = stage("train-agent", [&] { return run_agent_stage(cfg, sim); });
  const SweepResult sweep = stage("sweep", [&] { return run_sweep_stage(cfg, sim); });
  report.pareto.points = sweep.points;
  report.pareto.front = sweep.front;
  const ClosedLoop loop =
      stage("closed-loop", [&] { return run_closed_loop(cfg, sim, det, gnn, agent); });

  RecoverySummary& rec = report.recovery;
  rec.weights = agent.weights;
  rec.normalizers = agent.train.policy.normalizers;
  rec.episodes = cfg.eval.episodes;
  auto row = [&](const char* name, const ObjectiveVector& o) {
    rec.rows.push_back({name, o, weighted_objective(o, rec.weights, rec.normalizers)});
  };
  row("proposed", agent.proposed);
  row("random_policy", agent.random);
  row("no_op_policy", agent.noop);
  if (cfg.eval.closedLoopEpisodes > 0) row("closed_loop", loop.objectives);
  rec.latencyImprovementPct = improvement(agent.random.o1, agent.proposed.o1);
  rec.resourceImprovementPct = improvement(agent.random.o2, agent.proposed.o2);
  rec.costImprovementPct = improvement(agent.random.o3, agent.proposed.o3);
  rec.weightedImprovementPct = improvement(rec.rows[1].weighted, rec.rows[0].weighted);
  rec.closedLoopStateAccuracy = loop.stateAccuracy;
  report.attributions = loop.attributions;

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  report.provenance = {hash, cfg.seed, version_string()};
  return report;
}

}  // namespace selfheal
