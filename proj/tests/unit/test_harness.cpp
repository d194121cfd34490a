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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "selfheal/error.hpp"
#include "selfheal/harness.hpp"

namespace selfheal {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig tiny() { return load_config(std::string(SELFHEAL_TEST_DATA) + "/tiny.json"); }

// The tiny pipeline is cheap; run it once for the whole suite.
const RunReport& tiny_report() {
  static const RunReport r = run_pipeline(tiny());
  return r;
}

TEST(Config, DefaultsRoundTripThroughJson) {
  const RunConfig d;
  const RunConfig back = parse_config(config_to_json(d));
  EXPECT_EQ(config_to_json(back), config_to_json(d));
  EXPECT_EQ(parse_config("{}").detector.meta.metaIterations, d.detector.meta.metaIterations);
  EXPECT_EQ(parse_config(R"({"seed": 9})").seed, 9u);
}

TEST(Config, UnknownKeyNamesDottedPath) {
  try {
    parse_config(R"({"detector": {"alpah": 0.1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("detector.alpah"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config(R"({"simulator": {"graph": {"colour": 1}}})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seed": "x"})"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/selfheal.json"), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
  RunConfig c;
  c.agent.weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.eval.closedLoopEpisodes = c.eval.episodes + 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.detector.meta.alpha = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_NO_THROW(validate(RunConfig{}));
}

TEST(Config, HashIgnoresThreadsAndOutput) {
  RunConfig a, b;
  b.threads = 8;
  b.output.dir = "elsewhere";
  b.output.markdown = false;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 43;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b.gnn.tauG = 0.6;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, StageSeedsAreDistinct) {
  const RunConfig c;
  EXPECT_NE(stage_seed(c, "detector"), stage_seed(c, "gnn"));
  EXPECT_NE(stage_seed(c, "agent"), stage_seed(c, "eval"));
  RunConfig d = c;
  d.threads = 4;
  EXPECT_EQ(stage_seed(c, "simulator"), stage_seed(d, "simulator"));
}

TEST(Median, EvenOddEmpty) {
  EXPECT_EQ(median({}), 0.0);
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 9}), 3.0);
}

TEST(Adaptation, IdenticalInitsGiveIdenticalCounts) {
  const RunConfig c = tiny();
  const Simulation sim = simulate(c);
  const DetectorModel m = make_detector(c.simulator.windowW * 5, 3, c.detector.hidden);
  for (const AdaptationRow& r : compare_adaptation(m, m, sim.heldOutTasks, c.detector.meta)) {
    EXPECT_EQ(r.stepsProposed, r.stepsBaseline);
  }
  EXPECT_THROW(compare_adaptation(m, m, {}, c.detector.meta), InputError);
}

TEST(Simulation, DeterministicAndSized) {
  const RunConfig c = tiny();
  const Simulation a = simulate(c), b = simulate(c);
  EXPECT_EQ(a.trainPatterns.size(), 6u);
  EXPECT_EQ(a.heldOutTasks.size(), 3u);
  EXPECT_EQ(a.trainTasks.size(), 2u * 6u + 2u);  // originals, jittered copies, mixes
  EXPECT_EQ(a.trainCascades.size(), 10u);
  EXPECT_EQ(a.heldOutCascades.size(), 5u);
  EXPECT_EQ(a.graph, b.graph);
  for (std::size_t i = 0; i < a.heldOutTasks.size(); ++i) {
    EXPECT_EQ(a.heldOutTasks[i].query, b.heldOutTasks[i].query);
  }
  for (const Task& t : a.heldOutTasks)
    for (const Task& u : a.trainTasks) EXPECT_NE(t.sourcePatternId, u.sourcePatternId);
}

// Both detector initialisations see the same held-out tasks, and all three
// policies see the same episode seeds.
TEST(Fairness, BaselinesConsumeIdenticalInputs) {
  const RunConfig c = tiny();
  const Simulation sim = simulate(c);
  const DetectorStage d = run_detector_stage(c, sim);
  ASSERT_EQ(d.proposed.size(), sim.heldOutTasks.size());
  ASSERT_EQ(d.baseline.size(), sim.heldOutTasks.size());
  for (std::size_t i = 0; i < sim.heldOutTasks.size(); ++i) {
    EXPECT_EQ(d.proposed[i].confusion.total(), sim.heldOutTasks[i].query.size());
    EXPECT_EQ(d.baseline[i].confusion.total(), sim.heldOutTasks[i].query.size());
    const EvalReport again = evaluate(d.init, sim.heldOutTasks[i], c.detector.meta);
    EXPECT_EQ(d.baseline[i].confusion, again.confusion);
    EXPECT_EQ(d.baseline[i].f1, again.f1);
  }
  const AgentStage a = run_agent_stage(c, sim);
  EXPECT_EQ(a.evalSeeds.size(), c.eval.episodes);
  DatabaseRecoveryEnv env = make_env(c, sim);
  EXPECT_EQ(a.random, evaluate_policy(env, random_chooser(), a.evalSeeds));
  EXPECT_EQ(a.noop, evaluate_policy(env, noop_chooser(), a.evalSeeds));
  EXPECT_EQ(a.proposed, evaluate_policy(env, greedy_chooser(a.train.policy), a.evalSeeds));
}

// Desk fixture: the meta-learned init is never worse than random init after
// the same inner adaptation, over five seeds.
TEST(Detector, MetaTrainedDominatesRandomInit) {
  const RunConfig desk = load_config(std::string(SELFHEAL_SOURCE_DIR) + "/configs/desk.json");
  for (std::uint64_t s = desk.seed; s < desk.seed + 5; ++s) {
    RunConfig c = desk;
    c.seed = s;
    const DetectionSummary d = summarize_detection(run_detector_stage(c, simulate(c)));
    EXPECT_EQ(d.tasks, 10u);
    EXPECT_GE(d.f1, d.baselineF1) << "seed " << s;
  }
}

TEST(Pipeline, ReportShapeAndProvenance) {
  const RunReport& r = tiny_report();
  EXPECT_EQ(r.detection.tasks, 3u);
  EXPECT_EQ(r.adaptation.rows.size(), 3u);
  EXPECT_EQ(r.dependency.cascades, 5u);
  ASSERT_EQ(r.recovery.rows.size(), 4u);
  EXPECT_EQ(r.recovery.rows[0].policy, "proposed");
  EXPECT_EQ(r.recovery.rows[3].policy, "closed_loop");
  EXPECT_EQ(r.pareto.points.size(), 3u);
  EXPECT_LE(r.attributions.size(), 2u);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_hash(tiny())));
  EXPECT_EQ(r.provenance.configHash, hex);
  EXPECT_EQ(r.provenance.seed, 7u);
  EXPECT_EQ(r.provenance.version, version_string());
  const RecoveryRow& prop = r.recovery.rows[0];
  const RecoveryRow& rnd = r.recovery.rows[1];
  EXPECT_NEAR(r.recovery.weightedImprovementPct, 100.0 * (rnd.weighted - prop.weighted) / rnd.weighted, 1e-9);
  for (const auto& a : r.attributions) {
    double s = a.baseValue;
    for (double p : a.phi) s += p;
    EXPECT_NEAR(s, a.instanceValue, 1e-9);
    EXPECT_EQ(a.ranking.size(), kActionCount);
    EXPECT_EQ(a.ranking.front().gap, 0.0);
  }
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads) {
  RunConfig c = tiny();
  const std::string once = report_to_json(tiny_report());
  EXPECT_EQ(report_to_json(run_pipeline(c)), once);
  c.threads = 3;
  EXPECT_EQ(report_to_json(run_pipeline(c)), once);
}

TEST(Pipeline, NullTrainingReportsUntrainedModels) {
  RunConfig c = tiny();
  c.detector.meta.metaIterations = 0;
  c.agent.episodes = 0;
  const RunReport r = run_pipeline(c);
  EXPECT_EQ(r.detection.f1, r.detection.baselineF1);
  EXPECT_EQ(r.detection.precision, r.detection.baselinePrecision);
  EXPECT_EQ(r.detection.initialMetaLoss, r.detection.finalMetaLoss);
  // An all-zero Q table is the no_op policy.
  EXPECT_EQ(r.recovery.rows[0].objectives, r.recovery.rows[2].objectives);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  RunConfig c = tiny();
  c.detector.meta.beta = 1e305;  // diverges on the first update
  try {
    run_pipeline(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("train-detector"), std::string::npos) << e.what();
  }
  c = tiny();
  c.simulator.anomalyRate = 0.0;
  EXPECT_THROW(run_pipeline(c), ConfigError);
}

TEST(Report, JsonRoundTripIsExact) {
  const RunReport& r = tiny_report();
  const std::string text = report_to_json(r);
  const RunReport back = report_from_json(text);
  EXPECT_EQ(back, r);
  EXPECT_EQ(report_to_json(back), text);
  EXPECT_THROW(report_from_json("{}"), InputError);
  EXPECT_THROW(report_from_json("[1"), InputError);
}

TEST(Report, AbsentMttfpSurvivesRoundTrip) {
  RunReport r = tiny_report();
  r.dependency.mttfpSeconds.reset();
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  EXPECT_NE(report_to_markdown(r).find("MTTFP"), std::string::npos);
}

TEST(Report, MarkdownHasOneTablePerFamily) {
  const std::string md = report_to_markdown(tiny_report());
  for (const char* h : {"## Detection", "## Adaptation", "## Dependency prediction", "## Recovery",
                        "## Pareto sweep"}) {
    const auto at = md.find(h);
    ASSERT_NE(at, std::string::npos) << h;
    EXPECT_NE(md.find("|---", at), std::string::npos) << h;
  }
}

TEST(Report, MarkdownMatchesGoldenFile) {
  const std::string golden = read_file(fs::path(SELFHEAL_TEST_DATA) / "golden" / "tiny_report.md");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(report_to_markdown(tiny_report()), golden);
}

TEST(Report, EmitWritesBothFormats) {
  const fs::path dir = fs::temp_directory_path() / "selfheal_emit_test" / "nested";
  fs::remove_all(dir.parent_path());
  const auto paths = emit_report(tiny_report(), dir.string(), true, true);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(read_file(dir / "report.json"), report_to_json(tiny_report()));
  EXPECT_EQ(read_file(dir / "report.md"), report_to_markdown(tiny_report()));
  fs::remove_all(dir.parent_path());
  EXPECT_EQ(emit_report(tiny_report(), dir.string(), false, true).size(), 1u);
  fs::remove_all(dir.parent_path());
}

TEST(Report, EmitFailureNamesThePath) {
  const fs::path blocker = fs::temp_directory_path() / "selfheal_emit_blocker";
  { std::ofstream(blocker) << "file"; }
  const std::string target = (blocker / "sub").string();
  try {
    emit_report(tiny_report(), target, true, false);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(blocker.string()), std::string::npos) << e.what();
  }
  fs::remove(blocker);
}

}  // namespace
}  // namespace selfheal
