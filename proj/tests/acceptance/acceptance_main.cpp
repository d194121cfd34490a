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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "selfheal/depgraph.hpp"
#include "selfheal/detector.hpp"
#include "selfheal/explain.hpp"
#include "selfheal/harness.hpp"
#include "selfheal/recovery.hpp"

namespace {

using namespace selfheal;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool g_allPass = true;

void report(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  g_allPass = g_allPass && o.pass;
  std::printf("criterion %2d: %s  %s  [%s; %.2f s]\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

// ------------------------------------------------------------------ 1
Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  double worstMlp = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const oracle::MlpCase c = oracle::random_mlp_case(seed);
    const ParamSet fd =
        finite_diff_grad([&](const ParamSet& q) { return oracle::mlp_case_loss(c, q); }, c.params, 1e-5);
    worstMlp = std::max(worstMlp, oracle::max_rel_error(oracle::mlp_case_gradient(c), fd));
  }
  const GnnBatch batch = make_gnn_batch(oracle::chain3_dataset(4, 5));
  const GnnParams p = init_gnn(embedding_width(oracle::chain3()), {2, 5}, 8);
  const ParamSet fd = finite_diff_grad([&](const ParamSet& q) { return gnn_loss({q, p.arch}, batch); }, p.params, 1e-6);
  const double worstGnn = oracle::max_rel_error(gnn_loss_gradient(p, batch), fd, 1e-7);
  const double secs = seconds_since(t0);
  return {worstMlp < 1e-5 && worstGnn < 1e-5 && secs < 10.0,
          "max rel err MLP " + fmt("%.2e", worstMlp) + ", GNN " + fmt("%.2e", worstGnn)};
}

// ------------------------------------------------------------------ 2
Outcome maml_identities() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DetectorModel m = make_detector(20, seed, {8, 4});
    const auto tasks = make_tasks({random_pattern("a", seed), random_pattern("b", seed + 100)}, 6, 6, 4, seed);
    ok = ok && inner_adapt(m.params, m.layers, tasks[0].support, 0.0, 5) == m.params;
    ok = ok && inner_adapt(m.params, m.layers, tasks[0].support, 0.1, 0) == m.params;
    for (MetaMode mode : {MetaMode::first_order, MetaMode::exact_fd_oracle}) {
      MetaConfig c;
      c.beta = 0.0;
      c.metaMode = mode;
      ok = ok && meta_update(m.params, tasks, c, m.layers) == m.params;
    }
  }
  return {ok, "alpha=0, K=0, beta=0 on 10 models"};
}

// ------------------------------------------------------------------ 3
Outcome meta_gradient_oracle() {
  const Task t = oracle::unit_task();
  const double w = 0.4, b = -0.1;
  MetaConfig c;
  c.alpha = 0.1;
  c.innerSteps = 1;
  c.metaBatch = 1;
  c.metaMode = MetaMode::exact_fd_oracle;
  const auto [foHand, exact] = oracle::unit_meta_gradients(w, b, t, c.alpha);
  const std::span<const Task> one(&t, 1);
  const ParamSet g = meta_gradient(oracle::unit_params(w, b), one, c, oracle::unit_layers());
  c.metaMode = MetaMode::first_order;
  const ParamSet fo = meta_gradient(oracle::unit_params(w, b), one, c, oracle::unit_layers());
  const double gw = g.at(weight_name(0)).item(), gb = g.at(bias_name(0)).item();
  const double rel = std::max(std::abs(gw - exact.w) / std::abs(exact.w), std::abs(gb - exact.b) / std::abs(exact.b));
  const double cos = oracle::cosine(flatten(fo), flatten(g));
  return {rel <= 1e-4 && cos >= 0.95, "rel err " + fmt("%.2e", rel) + ", cosine " + fmt("%.4f", cos)};
}

// ------------------------------------------------------------------ 4, 5
struct DetectorSeedResult {
  double f1 = 0.0, medianProposed = 0.0, medianBaseline = 0.0, seconds = 0.0;
  std::size_t tasks = 0, innerSteps = 0;
};

DetectorSeedResult detector_seed(RunConfig cfg, std::uint64_t seed) {
  const auto t0 = Clock::now();
  cfg.seed = seed;
  const Simulation sim = simulate(cfg);
  const DetectorStage d = run_detector_stage(cfg, sim);
  const AdaptationSummary a =
      summarize_adaptation(compare_adaptation(d.trained, d.init, sim.heldOutTasks, cfg.detector.meta));
  DetectorSeedResult r;
  r.f1 = summarize_detection(d).f1;
  r.medianProposed = a.medianProposed;
  r.medianBaseline = a.medianBaseline;
  r.tasks = sim.heldOutTasks.size();
  r.innerSteps = cfg.detector.meta.innerSteps;
  r.seconds = seconds_since(t0);
  return r;
}

// ------------------------------------------------------------------ 6
Outcome gnn_layer_fixture() {
  const ComponentGraph g({{"a", NodeKind::disk, {}}, {"b", NodeKind::table, {}}}, {{0, 1, 1.0}});
  NodeEmbeddings e;
  e.ids = {"a", "b"};
  e.values = Tensor::matrix(2, 2, {1, 2, 3, -1});
  const Tensor W = Tensor::matrix(2, 2, {1, 0.5, -1, 2});
  const Tensor bias = Tensor::vector({0.1, -0.2});
  const NodeEmbeddings out = gnn_layer(g, e, W, bias, Activation::relu);
  const std::vector<double> want{2.1, 2.8, 4.6, 0.0};
  double err = 0.0;
  for (std::size_t i = 0; i < 4; ++i) err = std::max(err, std::abs(out.values[i] - want[i]));

  const NodeEmbeddings zero = gnn_layer(g, e, Tensor(Shape{2, 2}, 0.0), bias, Activation::sigmoid);
  bool sigmaExact = true;
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t k = 0; k < 2; ++k) sigmaExact = sigmaExact && zero.values.at(r, k) == logistic(bias[k]);

  // Relabel nodes of random graphs; rows must follow exactly.
  bool equivariant = true;
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const ComponentGraph base = random_component_graph(GraphSpec{}, 100 + trial);
    const std::size_t n = base.size(), d = 6;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<ComponentNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[perm[i]] = base.nodes()[i];
    std::vector<DependencyEdge> edges;
    for (const auto& ed : base.edges()) edges.push_back({perm[ed.from], perm[ed.to], ed.weight});
    const ComponentGraph pg(nodes, edges);
    std::vector<double> v(n * d), pv(n * d), wv(4 * d), bv(4);
    for (double& x : v) x = rng.normal();
    for (double& x : wv) x = rng.normal();
    for (double& x : bv) x = rng.normal();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(v.begin() + i * d, d, pv.begin() + perm[i] * d);
    NodeEmbeddings e1, e2;
    e1.values = Tensor(Shape{n, d}, v);
    e2.values = Tensor(Shape{n, d}, pv);
    for (std::size_t i = 0; i < n; ++i) e1.ids.push_back(base.nodes()[i].id);
    e2.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) e2.ids[perm[i]] = base.nodes()[i].id;
    const Tensor Wr(Shape{4, d}, wv), Br(Shape{4}, bv);
    const auto o1 = gnn_layer(base, e1, Wr, Br, Activation::relu);
    const auto o2 = gnn_layer(pg, e2, Wr, Br, Activation::relu);
    for (const auto& id : e1.ids) equivariant = equivariant && o1.of(id) == o2.of(id);
  }
  return {err <= 1e-12 && sigmaExact && equivariant,
          "hand err " + fmt("%.1e", err) + ", W=0 exact " + (sigmaExact ? "yes" : "no") + ", equivariant " +
              (equivariant ? "yes" : "no")};
}

// ------------------------------------------------------------------ 8
Outcome pareto_oracle() {
  bool equal = true, scaled = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<ObjectiveVector> pts(1000);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform(), rng.uniform()};
    const auto front = pareto_indices(pts);
    equal = equal && front == oracle::brute_force_front(pts);
    for (double c : {1e-3, 7.0, 1e5}) {
      auto s = pts;
      for (auto& p : s) p = {c * p.o1, c * p.o2, c * p.o3};
      scaled = scaled && pareto_indices(s) == front;
    }
  }
  return {equal && scaled, std::string("set equality ") + (equal ? "yes" : "no") + ", scaling " + (scaled ? "yes" : "no")};
}

// ------------------------------------------------------------------ 10
Outcome shapley_properties() {
  Rng rng(4);
  auto rows = [&](std::size_t n, std::size_t d) {
    std::vector<std::vector<double>> r(n, std::vector<double>(d));
    for (auto& x : r)
      for (double& v : x) v = rng.normal();
    return r;
  };
  double effErr = 0.0, linErr = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    DetectorModel m = make_detector(20, 500 + trial, {6});
    const FeatureGroups g = metric_groups(4);
    const Attribution a = shapley_attribution(m, rows(1, 20)[0], rows(4, 20), g);
    effErr = std::max(effErr, std::abs(std::accumulate(a.phi.begin(), a.phi.end(), a.baseValue) - a.instanceValue));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(10);
    std::vector<double> w(d);
    for (double& v : w) v = rng.normal();
    const BatchModel lin = [&](const std::vector<std::vector<double>>& in) {
      std::vector<double> out;
      for (const auto& r : in) out.push_back(std::inner_product(w.begin(), w.end(), r.begin(), 0.5));
      return out;
    };
    FeatureGroups g;
    for (std::size_t i = 0; i < d; ++i) {
      g.members.push_back({i});
      g.names.push_back(std::to_string(i));
    }
    const auto bg = rows(5, d);
    const auto x = rows(1, d)[0];
    const Attribution a = shapley_attribution(lin, x, bg, g);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (const auto& r : bg) mean += r[j] / static_cast<double>(bg.size());
      linErr = std::max(linErr, std::abs(a.phi[j] - w[j] * (x[j] - mean)));
    }
  }
  // symmetric pair plus an ignored feature
  const BatchModel sym = [](const std::vector<std::vector<double>>& in) {
    std::vector<double> out;
    for (const auto& r : in) out.push_back(std::tanh(r[0] * r[1] + r[0] + r[1]) + 0.0 * r[2]);
    return out;
  };
  FeatureGroups three{{{0}, {1}, {2}}, {"x0", "x1", "x2"}};
  const Attribution s = shapley_attribution(sym, {0.7, 0.7, 4.0}, {{0.1, 0.1, -2.0}, {-0.5, -0.5, 1.0}}, three);
  const double symErr = std::abs(s.phi[0] - s.phi[1]);
  const double dummy = std::abs(s.phi[2]);
  return {effErr <= 1e-9 && linErr <= 1e-9 && symErr <= 1e-9 && dummy <= 1e-9,
          "efficiency " + fmt("%.1e", effErr) + ", linear " + fmt("%.1e", linErr) + ", symmetry " +
              fmt("%.1e", symErr) + ", dummy " + fmt("%.1e", dummy)};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const RunConfig desk = load_config(SELFHEAL_DESK_CONFIG);
  const std::vector<std::uint64_t> seeds{desk.seed, desk.seed + 1, desk.seed + 2, desk.seed + 3, desk.seed + 4};

  report(1, "gradient oracle", gradient_oracle);
  report(2, "MAML identity cases", maml_identities);
  report(3, "meta-gradient oracle", meta_gradient_oracle);

  std::vector<DetectorSeedResult> det;
  report(4, "adaptation latency", [&] {
    det.push_back(detector_seed(desk, seeds[0]));
    const DetectorSeedResult& r = det[0];
    const bool ok = r.tasks == 10 && r.medianProposed <= 5.0 && r.medianBaseline >= 2.0 * r.medianProposed &&
                    r.seconds < 120.0;
    return Outcome{ok, "median steps " + fmt("%.1f", r.medianProposed) + " vs " + fmt("%.1f", r.medianBaseline) +
                           " on " + std::to_string(r.tasks) + " tasks"};
  });
  report(5, "detection quality", [&] {
    for (std::size_t i = det.size(); i < seeds.size(); ++i) det.push_back(detector_seed(desk, seeds[i]));
    double mean = 0.0;
    std::string per;
    for (const auto& r : det) {
      mean += r.f1 / static_cast<double>(det.size());
      per += (per.empty() ? "" : " ") + fmt("%.3f", r.f1);
    }
    return Outcome{mean >= 0.85 && det[0].innerSteps <= 5,
                   "mean F1 " + fmt("%.4f", mean) + " (" + per + "), " + std::to_string(det[0].innerSteps) +
                       " inner steps"};
  });

  report(6, "GNN layer fixture", gnn_layer_fixture);

  report(7, "cascade prediction", [&] {
    const auto t0 = Clock::now();
    const DependencySummary d = summarize_dependency(run_gnn_stage(desk, simulate(desk)));
    const double secs = seconds_since(t0);
    return Outcome{d.accuracy >= 0.85 && d.mttfpDefinedFraction >= 0.8 && secs < 180.0,
                   "node accuracy " + fmt("%.4f", d.accuracy) + ", early warning on " +
                       fmt("%.0f", 100.0 * d.mttfpDefinedFraction) + "% of " + std::to_string(d.cascades) +
                       " cascades"};
  });

  report(8, "Pareto oracle", pareto_oracle);

  report(9, "recovery direction", [&] {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string per;
    for (std::uint64_t s : seeds) {
      RunConfig c = desk;
      c.seed = s;
      const AgentStage a = run_agent_stage(c, simulate(c));
      const Normalizers& n = a.train.policy.normalizers;
      const double prop = weighted_objective(a.proposed, a.weights, n);
      const double rnd = weighted_objective(a.random, a.weights, n);
      const double noop = weighted_objective(a.noop, a.weights, n);
      const double gain = 100.0 * (rnd - prop) / rnd;
      ok = ok && gain >= 20.0 && prop <= noop;
      per += (per.empty() ? "" : " ") + fmt("%.1f%%", gain);
    }
    const double secs = seconds_since(t0);
    return Outcome{ok && secs < 180.0, "improvement over random " + per + ", all <= no_op " + (ok ? "yes" : "no")};
  });

  report(10, "Shapley properties", shapley_properties);

  report(11, "determinism", [&] {
    RunConfig a = desk, b = desk;
    a.threads = 1;
    b.threads = 2;
    const std::string ja = report_to_json(run_pipeline(a));
    const std::string jb = report_to_json(run_pipeline(b));
    return Outcome{ja == jb, std::to_string(ja.size()) + " bytes, threads 1 vs 2 " + (ja == jb ? "identical" : "differ")};
  });

  const double total = seconds_since(start);
  report(12, "full suite runtime", [&] {
    return Outcome{total < 600.0 && g_allPass, fmt("%.1f s", total) + (g_allPass ? "" : ", earlier criterion failed")};
  });
  return g_allPass ? 0 : 1;
}
