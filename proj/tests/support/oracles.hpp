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

// Independent reference computations shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "selfheal/autodiff.hpp"
#include "selfheal/depgraph.hpp"
#include "selfheal/detector.hpp"
#include "selfheal/mlp.hpp"
#include "selfheal/recovery.hpp"
#include "selfheal/rng.hpp"
#include "selfheal/tensor.hpp"

namespace selfheal::oracle {

// |a - b| <= rel * max(|a|, |b|) + floor
inline bool close(double a, double b, double rel, double floor = 1e-8) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor;
}

// Worst relative discrepancy between two update-compatible sets, with an
// absolute floor so exact zeros do not blow up.
inline double max_rel_error(const ParamSet& a, const ParamSet& b, double floor = 1e-8) {
  double worst = 0.0;
  for (const auto& [name, t] : a) {
    const Tensor& u = b.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double denom = std::max({std::abs(t[i]), std::abs(u[i]), floor});
      worst = std::max(worst, std::abs(t[i] - u[i]) / denom);
    }
  }
  return worst;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// O(n^2) non-dominated set, minimisation.
inline std::vector<std::size_t> brute_force_front(const std::vector<ObjectiveVector>& pts) {
  auto worse = [](const ObjectiveVector& p, const ObjectiveVector& q) {
    const bool le = q.o1 <= p.o1 && q.o2 <= p.o2 && q.o3 <= p.o3;
    const bool lt = q.o1 < p.o1 || q.o2 < p.o2 || q.o3 < p.o3;
    return le && lt;  // q dominates p
  };
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) dominated = worse(pts[i], pts[j]);
    if (!dominated) out.push_back(i);
  }
  return out;
}

// Small random MLP with a BCE or squared-error head and its data, drawn from
// one seed. Used for the reverse-mode vs finite-difference comparison.
struct MlpCase {
  ParamSet params;
  LayerSpec spec;
  Tensor input;
  std::vector<double> labels;
  bool bceHead = true;
};

inline MlpCase random_mlp_case(std::uint64_t seed) {
  Rng rng(seed);
  MlpCase c;
  const std::size_t in = 1 + rng.below(5);
  const std::size_t depth = 1 + rng.below(3);
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    const Activation act = rng.bernoulli(0.5) ? Activation::relu : Activation::sigmoid;
    c.spec.push_back({1 + rng.below(6), act});
  }
  c.bceHead = rng.bernoulli(0.7);
  c.spec.push_back({1, c.bceHead ? Activation::sigmoid : Activation::linear});
  c.params = init_mlp(in, c.spec, derive_seed(seed, "init"));
  // Scale weights up so hidden units are not all in the linear regime.
  for (auto& [name, t] : c.params) {
    std::vector<double> v(t.values().begin(), t.values().end());
    for (double& x : v) x *= 3.0;
    t = Tensor(t.shape(), std::move(v));
  }
  const std::size_t n = 8;
  std::vector<double> x(n * in);
  for (double& v : x) v = rng.normal();
  c.input = Tensor::matrix(n, in, std::move(x));
  for (std::size_t i = 0; i < n; ++i) {
    c.labels.push_back(c.bceHead ? static_cast<double>(rng.below(2)) : rng.normal());
  }
  return c;
}

inline double mlp_case_loss(const MlpCase& c, const ParamSet& p) {
  const Tensor out = forward_mlp(p, c.input, c.spec);
  if (c.bceHead) return bce_loss(out.values(), c.labels);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - c.labels[i]) * (out[i] - c.labels[i]);
  return s / static_cast<double>(out.size());
}

inline ParamSet mlp_case_gradient(const MlpCase& c) {
  ad::Tape tape;
  const auto vars = tape.watch(c.params);
  const ad::Var x = tape.constant(c.input);
  const ad::Var out = forward_mlp(vars, x, c.spec);
  ad::Var loss;
  if (c.bceHead) {
    loss = ad::bce(out, c.labels);
  } else {
    const Tensor y(out.value().shape(), c.labels);
    loss = ad::mean(ad::square(ad::sub(out, tape.constant(y))));
  }
  return tape.gradient(loss, c.params);
}

// 3-node chain a -> b -> c with distinct kinds and static features.
inline ComponentGraph chain3() {
  std::vector<ComponentNode> nodes{{"a", NodeKind::disk, {0.8, 0.9}},
                                   {"b", NodeKind::table, {0.5, 0.6}},
                                   {"c", NodeKind::query, {0.3, 0.2}}};
  std::vector<DependencyEdge> edges{{0, 1, 1.0}, {1, 2, 1.0}};
  return ComponentGraph(std::move(nodes), std::move(edges));
}

// Two-parameter detector p = sigmoid(w x + b) on one scalar feature, with a
// fixed task and hand-derived gradient, Hessian and one-step meta-gradient.
inline LayerSpec unit_layers() { return {{1, Activation::sigmoid}}; }

inline ParamSet unit_params(double w, double b) {
  return {{weight_name(0), Tensor::matrix(1, 1, {w})}, {bias_name(0), Tensor::vector({b})}};
}

inline Dataset scalar_data(std::vector<std::pair<double, int>> rows) {
  Dataset d;
  for (auto [x, y] : rows) d.push_back({{x}, y});
  return d;
}

inline Task unit_task() {
  Task t;
  t.support = scalar_data({{0.8, 1}, {-0.4, 0}, {1.5, 1}, {-1.1, 0}, {0.2, 0}});
  t.query = scalar_data({{0.6, 1}, {-0.9, 0}, {1.2, 1}, {-0.3, 1}, {0.1, 0}, {-1.4, 0}});
  t.sourcePatternId = "unit";
  return t;
}

struct Grad2 {
  double w = 0.0, b = 0.0;
};

inline double unit_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// mean((p - y) [x, 1])
inline Grad2 unit_gradient(double w, double b, const Dataset& d) {
  Grad2 g;
  for (const auto& e : d) {
    const double r = unit_sigmoid(w * e.features[0] + b) - e.label;
    g.w += r * e.features[0];
    g.b += r;
  }
  g.w /= static_cast<double>(d.size());
  g.b /= static_cast<double>(d.size());
  return g;
}

// mean(p (1 - p) [x, 1][x, 1]^T) as {ww, wb, bb}
inline std::array<double, 3> unit_hessian(double w, double b, const Dataset& d) {
  std::array<double, 3> h{0, 0, 0};
  for (const auto& e : d) {
    const double x = e.features[0];
    const double p = unit_sigmoid(w * x + b);
    const double s = p * (1.0 - p);
    h[0] += s * x * x;
    h[1] += s * x;
    h[2] += s;
  }
  for (double& v : h) v /= static_cast<double>(d.size());
  return h;
}

// Query gradient at the adapted point, before and after the (I - alpha H)
// correction.
inline std::pair<Grad2, Grad2> unit_meta_gradients(double w, double b, const Task& t, double alpha) {
  const Grad2 gs = unit_gradient(w, b, t.support);
  const auto h = unit_hessian(w, b, t.support);
  const Grad2 gq = unit_gradient(w - alpha * gs.w, b - alpha * gs.b, t.query);
  Grad2 exact;
  exact.w = (1 - alpha * h[0]) * gq.w - alpha * h[1] * gq.b;
  exact.b = -alpha * h[1] * gq.w + (1 - alpha * h[2]) * gq.b;
  return {gq, exact};
}

// Cascade traces on chain3 seeded at its root.
inline std::vector<CascadeTrace> chain3_dataset(std::size_t n, std::uint64_t seed) {
  const ComponentGraph g = chain3();
  Rng rng(seed);
  std::vector<CascadeTrace> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(propagate_cascade(g, "a", rng.below(4), 10, 0.5, rng.next_u64()));
  }
  return out;
}

}  // namespace selfheal::oracle
