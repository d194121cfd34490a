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

#include <benchmark/benchmark.h>

#include "selfheal/autodiff.hpp"
#include "selfheal/depgraph.hpp"
#include "selfheal/detector.hpp"
#include "selfheal/explain.hpp"
#include "selfheal/recovery.hpp"
#include "selfheal/rng.hpp"

namespace {

using namespace selfheal;

void BM_DetectorGradient(benchmark::State& state) {
  const DetectorModel m = make_detector(20, 1);
  const Task t = make_tasks({random_pattern("b", 1)}, 10, static_cast<std::size_t>(state.range(0)), 4, 2)[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_gradient(m.params, dataset_loss(m.layers, t.query)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DetectorGradient)->Arg(20)->Arg(200);

void BM_MetaUpdate(benchmark::State& state) {
  const DetectorModel m = make_detector(20, 1);
  std::vector<WorkloadPattern> pats;
  for (int i = 0; i < 4; ++i) pats.push_back(random_pattern("p" + std::to_string(i), i));
  const auto tasks = make_tasks(pats, 10, 20, 4, 3);
  MetaConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(meta_update(m.params, tasks, c, m.layers));
}
BENCHMARK(BM_MetaUpdate);

void BM_GnnLayer(benchmark::State& state) {
  GraphSpec spec;
  spec.tables = spec.indexes = spec.queries = static_cast<std::size_t>(state.range(0));
  const ComponentGraph g = random_component_graph(spec, 3);
  Rng rng(4);
  const std::size_t d = embedding_width(g);
  std::vector<double> v(g.size() * d), w(16 * d);
  for (double& x : v) x = rng.normal();
  for (double& x : w) x = rng.normal();
  NodeEmbeddings e;
  e.values = Tensor(Shape{g.size(), d}, v);
  for (const auto& n : g.nodes()) e.ids.push_back(n.id);
  const Tensor W(Shape{16, d}, w), B(Shape{16}, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(gnn_layer(g, e, W, B, Activation::relu));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}
BENCHMARK(BM_GnnLayer)->Arg(4)->Arg(64);

void BM_ParetoFront(benchmark::State& state) {
  Rng rng(5);
  std::vector<ObjectiveVector> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {rng.uniform(), rng.uniform(), rng.uniform()};
  for (auto _ : state) benchmark::DoNotOptimize(pareto_indices(pts));
}
BENCHMARK(BM_ParetoFront)->Arg(100)->Arg(1000);

void BM_Shapley(benchmark::State& state) {
  const DetectorModel m = make_detector(20, 6);
  Rng rng(7);
  auto row = [&] {
    std::vector<double> r(20);
    for (double& x : r) x = rng.normal();
    return r;
  };
  std::vector<std::vector<double>> bg;
  for (int i = 0; i < state.range(0); ++i) bg.push_back(row());
  const auto x = row();
  const FeatureGroups g = metric_groups(4);
  for (auto _ : state) benchmark::DoNotOptimize(shapley_attribution(m, x, bg, g));
}
BENCHMARK(BM_Shapley)->Arg(4)->Arg(16);

void BM_AgentEpisode(benchmark::State& state) {
  DatabaseRecoveryEnv env(random_pattern("live", 1), random_component_graph({}, 1), {});
  const auto chooser = random_chooser();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_episode(env, chooser, seed++));
}
BENCHMARK(BM_AgentEpisode);

}  // namespace
