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

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "selfheal/detector.hpp"
#include "selfheal/error.hpp"

namespace selfheal {
namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

using oracle::Grad2;
using oracle::scalar_data;
using oracle::unit_params;
using oracle::unit_task;
const LayerSpec kUnit = oracle::unit_layers();

Grad2 grad_of(double w, double b, const Dataset& d) { return oracle::unit_gradient(w, b, d); }

MetaConfig unit_config(MetaMode mode) {
  MetaConfig c;
  c.alpha = 0.1;
  c.beta = 0.05;
  c.innerSteps = 1;
  c.metaBatch = 1;
  c.metaMode = mode;
  c.fdStep = 1e-5;
  return c;
}

TEST(TaskLoss, ClosedFormsAndSingleton) {
  const ParamSet zero = unit_params(0.0, 0.0);
  const Dataset d = unit_task().query;
  EXPECT_NEAR(task_loss(zero, kUnit, d), std::log(2.0), 1e-15);

  // Saturated predictions that agree with the labels.
  const ParamSet sharp = unit_params(200.0, 0.0);
  EXPECT_LE(task_loss(sharp, kUnit, scalar_data({{1.0, 1}, {-1.0, 0}})), 1.1e-7);

  const ParamSet p = unit_params(0.7, -0.2);
  const Dataset one = scalar_data({{0.5, 1}});
  EXPECT_EQ(task_loss(p, kUnit, one), bce_loss(sig(0.7 * 0.5 - 0.2), 1.0));
  EXPECT_NEAR(task_loss(p, kUnit, one), bce_loss(sig(0.15), 1.0), 1e-15);
}

TEST(TaskLoss, WidthMismatchAndEmptyData) {
  const ParamSet p = unit_params(1.0, 0.0);
  Dataset wide{{{1.0, 2.0}, 1}};
  EXPECT_THROW(task_loss(p, kUnit, wide), Error);
  EXPECT_THROW(task_loss(p, kUnit, Dataset{}), InputError);
}

TEST(TaskLoss, TapedGradientMatchesHandForm) {
  const ParamSet p = unit_params(0.7, -0.2);
  const Dataset d = unit_task().support;
  const ParamSet g = loss_gradient(p, dataset_loss(kUnit, d));
  const Grad2 h = grad_of(0.7, -0.2, d);
  EXPECT_NEAR(g.at(weight_name(0)).item(), h.w, 1e-15);
  EXPECT_NEAR(g.at(bias_name(0)).item(), h.b, 1e-15);
}

TEST(InnerAdapt, IdentityCasesAreExact) {
  const DetectorModel m = make_detector(20, 3);
  const Task t = make_tasks({random_pattern("p", 1)}, 10, 10, 4, 2)[0];
  EXPECT_EQ(inner_adapt(m.params, m.layers, t.support, 0.0, 5), m.params);
  EXPECT_EQ(inner_adapt(m.params, m.layers, t.support, 0.3, 0), m.params);
}

TEST(InnerAdapt, ScalarSurrogateOneStep) {
  const ParamSet theta{{"theta", Tensor::scalar(1.0)}};
  const TapedLoss sq = [](ad::Tape&, const VarMap& v) { return ad::sum(ad::square(v.at("theta"))); };
  const ParamSet out = inner_adapt(theta, sq, 0.1, 1);
  EXPECT_NEAR(out.at("theta").item(), 0.8, 1e-15);
  EXPECT_EQ(theta.at("theta").item(), 1.0);
  EXPECT_NEAR(inner_adapt(theta, sq, 0.1, 3).at("theta").item(), 0.512, 1e-15);
}

TEST(MetaUpdate, ZeroBetaIsIdentity) {
  const DetectorModel m = make_detector(20, 5);
  const auto tasks = make_tasks({random_pattern("a", 1), random_pattern("b", 2)}, 6, 6, 4, 3);
  MetaConfig c;
  c.beta = 0.0;
  EXPECT_EQ(meta_update(m.params, tasks, c, m.layers), m.params);
  c.metaMode = MetaMode::exact_fd_oracle;
  EXPECT_EQ(meta_update(m.params, tasks, c, m.layers), m.params);
  EXPECT_THROW(meta_update(m.params, std::span<const Task>{}, c, m.layers), InputError);
}

TEST(MetaUpdate, FirstOrderSingleTaskHandComposition) {
  const Task t = unit_task();
  const double w = 0.4, b = -0.1;
  const MetaConfig c = unit_config(MetaMode::first_order);
  const Grad2 gs = grad_of(w, b, t.support);
  const double w1 = w - c.alpha * gs.w, b1 = b - c.alpha * gs.b;
  const Grad2 gq = grad_of(w1, b1, t.query);
  const ParamSet out = meta_update(unit_params(w, b), std::span<const Task>(&t, 1), c, kUnit);
  EXPECT_NEAR(out.at(weight_name(0)).item(), w - c.beta * gq.w, 1e-14);
  EXPECT_NEAR(out.at(bias_name(0)).item(), b - c.beta * gq.b, 1e-14);
}

TEST(MetaGradient, ExactOracleMatchesChainRule) {
  const Task t = unit_task();
  const double w = 0.4, b = -0.1;
  const MetaConfig c = unit_config(MetaMode::exact_fd_oracle);
  const auto [fo_hand, exact] = oracle::unit_meta_gradients(w, b, t, c.alpha);
  const double ew = exact.w, eb = exact.b;
  const ParamSet g = meta_gradient(unit_params(w, b), std::span<const Task>(&t, 1), c, kUnit);
  EXPECT_TRUE(oracle::close(g.at(weight_name(0)).item(), ew, 1e-4, 0)) << g.at(weight_name(0)).item() << " vs " << ew;
  EXPECT_TRUE(oracle::close(g.at(bias_name(0)).item(), eb, 1e-4, 0)) << g.at(bias_name(0)).item() << " vs " << eb;

  const ParamSet fo = meta_gradient(unit_params(w, b), std::span<const Task>(&t, 1),
                                    unit_config(MetaMode::first_order), kUnit);
  EXPECT_NEAR(fo.at(weight_name(0)).item(), fo_hand.w, 1e-14);
  EXPECT_NEAR(fo.at(bias_name(0)).item(), fo_hand.b, 1e-14);
  EXPECT_GE(oracle::cosine(flatten(fo), flatten(g)), 0.95);
}

TEST(MetaGradient, SumsOverTasksInOrder) {
  const DetectorModel m = make_detector(20, 8, {6});
  const auto tasks = make_tasks({random_pattern("a", 1), random_pattern("b", 2), random_pattern("c", 3)},
                                6, 6, 4, 3);
  MetaConfig c;
  ParamSet expected = zeros_like(m.params);
  for (const Task& t : tasks) {
    expected = axpy(expected, meta_gradient(m.params, std::span<const Task>(&t, 1), c, m.layers), 1.0);
  }
  const ParamSet got = meta_gradient(m.params, tasks, c, m.layers);
  EXPECT_LT(oracle::max_rel_error(got, expected), 1e-12);

  std::vector<Task> reversed(tasks.rbegin(), tasks.rend());
  EXPECT_LT(oracle::max_rel_error(meta_gradient(m.params, reversed, c, m.layers), got), 1e-12);
  c.threads = 3;
  EXPECT_EQ(meta_gradient(m.params, tasks, c, m.layers), got);
}

// Linearly separable tasks sharing a direction with task-specific tilt.
std::vector<Task> separable_tasks(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Task> out;
  for (std::size_t t = 0; t < count; ++t) {
    std::vector<double> u{1.0, 0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal()};
    auto draw = [&](std::size_t n) {
      Dataset d;
      while (d.size() < n) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.normal();
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += u[i] * x[i];
        const int y = s > 0 ? 1 : 0;
        if (static_cast<int>(d.size() % 2) != y) continue;  // alternate classes
        d.push_back({x, y});
      }
      return d;
    };
    out.push_back({draw(10), draw(20), "sep" + std::to_string(t)});
  }
  return out;
}

TEST(MetaTrain, ZeroIterationsReturnsInit) {
  const DetectorModel m = make_detector(4, 1, {8});
  MetaConfig c;
  c.metaIterations = 0;
  EXPECT_EQ(meta_train(m, separable_tasks(8, 2), c, 3).model, m);
}

TEST(MetaTrain, SeparableFixtureHalvesTheMetaLoss) {
  const DetectorModel m = make_detector(4, 1, {8});
  MetaConfig c;
  c.metaIterations = 200;
  const std::vector<Task> tasks = separable_tasks(8, 2);
  const MetaTrainResult r = meta_train(m, tasks, c, 3);
  EXPECT_EQ(r.metaLossCurve.size(), 200u);
  EXPECT_LE(r.finalMetaLoss, 0.5 * r.initialMetaLoss)
      << r.initialMetaLoss << " -> " << r.finalMetaLoss;
  EXPECT_LE(r.finalMetaLoss, r.initialMetaLoss);
}

TEST(MetaTrain, DeterministicAndThreadInvariant) {
  const DetectorModel m = make_detector(4, 1, {8});
  MetaConfig c;
  c.metaIterations = 30;
  const std::vector<Task> tasks = separable_tasks(8, 2);
  const MetaTrainResult a = meta_train(m, tasks, c, 3);
  const MetaTrainResult b = meta_train(m, tasks, c, 3);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.batches, b.batches);
  c.threads = 4;
  EXPECT_EQ(meta_train(m, tasks, c, 3).model, a.model);
  EXPECT_NE(meta_train(m, tasks, c, 4).model, a.model);
}

TEST(MetaTrain, DivergenceReportsIteration) {
  const DetectorModel m = make_detector(4, 1, {8});
  MetaConfig c;
  c.metaIterations = 50;
  c.beta = 1e305;
  try {
    meta_train(m, separable_tasks(8, 2), c, 3);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}

TEST(MetaTrain, TooFewTasksForBatch) {
  MetaConfig c;
  c.metaBatch = 9;
  EXPECT_THROW(meta_train(make_detector(4, 1, {8}), separable_tasks(8, 2), c, 3), InputError);
}

TEST(Detect, ThresholdRule) {
  DetectorModel m;
  m.layers = kUnit;
  m.params = unit_params(0.0, std::log(0.7 / 0.3));
  const Detection d = detect(m, {5.0});
  EXPECT_NEAR(d.score, 0.7, 1e-15);
  EXPECT_EQ(d.flag, 1);
  m.threshold = d.score;
  EXPECT_EQ(detect(m, {5.0}).flag, 1);
  m.threshold = std::nextafter(d.score, 1.0);
  EXPECT_EQ(detect(m, {5.0}).flag, 0);
  EXPECT_THROW(detect(m, {1.0, 2.0}), InputError);
}

TEST(Detect, AllZeroModelScoresHalfAndFlags) {
  DetectorModel m = make_detector(20, 1);
  m.params = zeros_like(m.params);
  const Detection d = detect(m, std::vector<double>(20, 0.3));
  EXPECT_EQ(d.score, 0.5);
  EXPECT_EQ(d.flag, 1);
  const auto batch = detect_batch(m, {std::vector<double>(20, 1.0), std::vector<double>(20, -1.0)});
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(batch[1].score, 0.5);
}

TEST(Metrics, FormulaAndDegenerateCases) {
  const EvalReport r = metrics_from_confusion({9, 1, 2, 0});
  EXPECT_NEAR(r.precision, 0.9, 1e-15);
  EXPECT_NEAR(r.recall, 9.0 / 11.0, 1e-15);
  EXPECT_NEAR(r.recall, 0.8182, 1e-4);
  EXPECT_NEAR(r.f1, 0.8571, 1e-4);
  const EvalReport z = metrics_from_confusion({0, 0, 5, 5});
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
}

TEST(Evaluate, PerfectPredictionsAndCountsSum) {
  DetectorModel m;
  m.layers = kUnit;
  m.params = unit_params(40.0, 0.0);
  Task t;
  t.support = scalar_data({{1.0, 1}, {-1.0, 0}, {2.0, 1}, {-2.0, 0}});
  t.query = scalar_data({{0.5, 1}, {-0.5, 0}, {1.5, 1}, {-1.5, 0}, {3.0, 1}});
  MetaConfig c;
  const EvalReport r = evaluate(m, t, c);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.adaptationSteps, 0u);
  EXPECT_EQ(r.confusion.total(), t.query.size());

  const DetectorModel rnd = make_detector(20, 9);
  for (const Task& task : make_tasks({random_pattern("a", 1), random_pattern("b", 2)}, 10, 20, 4, 1)) {
    EXPECT_EQ(evaluate(rnd, task, c).confusion.total(), task.query.size());
  }
}

TEST(AdaptationSteps, BoundsAndMonotoneMeaning) {
  const ParamSet zero = unit_params(0.0, 0.0);
  const Dataset d = unit_task().support;
  // ln 2 > 0.35, so a zero model needs at least one step; an unreachable
  // bound reports the cap.
  EXPECT_GE(adaptation_steps(zero, kUnit, d, 0.1, 50, 0.35), 1u);
  EXPECT_EQ(adaptation_steps(zero, kUnit, d, 0.1, 7, 1e-9), 7u);
  EXPECT_EQ(adaptation_steps(zero, kUnit, d, 0.1, 7, 0.8), 0u);
}

TEST(Checkpoint, RoundTripIsExact) {
  DetectorModel m = make_detector(20, 4, {7, 3}, 0.42);
  std::stringstream s;
  save_checkpoint(s, m);
  EXPECT_EQ(load_checkpoint(s), m);
  std::istringstream bad("not a checkpoint");
  EXPECT_THROW(load_checkpoint(bad), Error);
}

TEST(MakeDetector, DefaultArchitectureAndInitRange) {
  const DetectorModel m = make_detector(20, 6);
  ASSERT_EQ(m.layers.size(), 3u);
  EXPECT_EQ(m.layers[0].width, 32u);
  EXPECT_EQ(m.layers[1].width, 16u);
  EXPECT_EQ(m.layers[2].activation, Activation::sigmoid);
  const double bound = 0.5 / std::sqrt(20.0);
  for (double v : m.params.at(weight_name(0)).values()) EXPECT_LE(std::abs(v), bound);
  EXPECT_THROW(make_detector(20, 6, {32, 16}, 1.0), ConfigError);
}

}  // namespace
}  // namespace selfheal
