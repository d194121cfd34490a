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

#include "selfheal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "selfheal/error.hpp"
#include "selfheal/rng.hpp"

namespace selfheal {

std::string metric_column(Metric m) {
  switch (m) {
    case Metric::cpu: return "cpu";
    case Metric::memory: return "memory";
    case Metric::latency: return "latencyMs";
    case Metric::io: return "ioOps";
    case Metric::qps: return "qps";
  }
  return "cpu";
}

double TelemetryWindow::metric(Metric m) const {
  switch (m) {
    case Metric::cpu: return cpu;
    case Metric::memory: return memory;
    case Metric::latency: return latencyMs;
    case Metric::io: return ioOps;
    case Metric::qps: return qps;
  }
  return 0.0;
}

void TelemetryWindow::set_metric(Metric m, double v) {
  switch (m) {
    case Metric::cpu: cpu = v; break;
    case Metric::memory: memory = v; break;
    case Metric::latency: latencyMs = v; break;
    case Metric::io: ioOps = v; break;
    case Metric::qps: qps = v; break;
  }
}

MetricArray TelemetryWindow::metrics() const { return {cpu, memory, latencyMs, ioOps, qps}; }

bool clamp_window(TelemetryWindow& w) {
  bool changed = false;
  auto clamp = [&](double& v, double lo, double hi) {
    const double c = std::clamp(v, lo, hi);
    if (c != v) changed = true;
    v = c;
  };
  constexpr double kInf = std::numeric_limits<double>::max();
  clamp(w.cpu, 0.0, 1.0);
  clamp(w.memory, 0.0, 1.0);
  clamp(w.latencyMs, 0.0, kInf);
  clamp(w.ioOps, 0.0, kInf);
  clamp(w.qps, 0.0, kInf);
  return changed;
}

void validate(const WorkloadPattern& p) {
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    if (!(p.noiseStd[m] >= 0.0)) throw InputError("pattern " + p.patternId + ": noiseStd < 0");
  }
  if (!(p.anomalyRate >= 0.0 && p.anomalyRate <= 0.5)) {
    throw InputError("pattern " + p.patternId + ": anomalyRate must lie in [0, 0.5]");
  }
  if (p.periodTicks == 0) throw InputError("pattern " + p.patternId + ": periodTicks must be > 0");
}

WorkloadPattern random_pattern(const std::string& id, std::uint64_t seed, double anomalyRate) {
  constexpr MetricArray kCentre = {0.3, 0.4, 20.0, 300.0, 400.0};
  Rng rng(seed);
  WorkloadPattern p;
  p.patternId = id;
  p.anomalyRate = anomalyRate;
  p.periodTicks = 48 + rng.below(97);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    p.baseRates[m] = kCentre[m] * rng.uniform(0.7, 1.3);
    p.diurnalAmplitude[m] = p.baseRates[m] * rng.uniform(0.0, 0.1);
    p.noiseStd[m] = p.baseRates[m] * rng.uniform(0.02, 0.05);
  }
  return p;
}

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::cpu_spike: return "cpu_spike";
    case AnomalyKind::memory_leak: return "memory_leak";
    case AnomalyKind::lock_contention: return "lock_contention";
    case AnomalyKind::io_saturation: return "io_saturation";
    case AnomalyKind::cascade_seed: return "cascade_seed";
  }
  return "cpu_spike";
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
  for (auto k : {AnomalyKind::cpu_spike, AnomalyKind::memory_leak, AnomalyKind::lock_contention,
                 AnomalyKind::io_saturation, AnomalyKind::cascade_seed}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown anomaly kind '" + s + "'");
}

Metric affected_metric(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::cpu_spike: return Metric::cpu;
    case AnomalyKind::memory_leak: return Metric::memory;
    case AnomalyKind::lock_contention: return Metric::latency;
    case AnomalyKind::io_saturation: return Metric::io;
    case AnomalyKind::cascade_seed: return Metric::latency;
  }
  return Metric::cpu;
}

Trace inject_anomaly(Trace trace, const AnomalyEvent& event) {
  if (event.duration < 1) throw InputError("inject_anomaly: duration must be >= 1");
  if (!(event.magnitude > 1.0)) throw InputError("inject_anomaly: magnitude must be > 1");
  if (event.onset >= trace.size() || event.duration > trace.size() - event.onset) {
    throw InputError("inject_anomaly: event [" + std::to_string(event.onset) + ", " +
                     std::to_string(event.onset + event.duration) +
                     ") does not fit a trace of " + std::to_string(trace.size()) + " ticks");
  }
  const Metric m = affected_metric(event.kind);
  for (std::uint64_t t = event.onset; t < event.onset + event.duration; ++t) {
    TelemetryWindow& w = trace[t];
    w.set_metric(m, w.metric(m) * event.magnitude);
    clamp_window(w);
    w.label = 1;
  }
  return trace;
}

Trace generate_trace(const WorkloadPattern& pattern, std::uint64_t seed, std::size_t ticks) {
  validate(pattern);
  if (ticks == 0) throw InputError("generate_trace: ticks must be >= 1");
  Rng noise(derive_seed(seed, "metrics"));
  Trace trace(ticks);
  const double omega = 2.0 * std::numbers::pi / static_cast<double>(pattern.periodTicks);
  for (std::size_t t = 0; t < ticks; ++t) {
    TelemetryWindow& w = trace[t];
    w.index = t;
    const double phase = std::sin(omega * static_cast<double>(t));
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const double v = pattern.baseRates[m] + pattern.diurnalAmplitude[m] * phase +
                       noise.normal(0.0, pattern.noiseStd[m]);
      w.set_metric(static_cast<Metric>(m), v);
    }
    clamp_window(w);
  }

  const double rate = pattern.anomalyRate;
  if (rate <= 0.0) return trace;
  // Alternate geometric normal gaps and events of 2..6 ticks; with mean
  // event length 4 the gap mean 4(1-r)/r gives an anomalous fraction of r.
  Rng events(derive_seed(seed, "events"));
  const double gap_mean = 4.0 * (1.0 - rate) / rate;
  const double q = 1.0 / (gap_mean + 1.0);
  std::uint64_t t = 0;
  while (true) {
    double u;
    do {
      u = events.uniform();
    } while (u <= 0.0);
    const auto gap = q >= 1.0 ? 0 : static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-q)));
    t += gap;
    if (t >= ticks) break;
    AnomalyEvent ev;
    ev.kind = static_cast<AnomalyKind>(events.below(4));
    ev.onset = t;
    ev.duration = std::min<std::uint64_t>(2 + events.below(5), ticks - t);
    ev.magnitude = events.uniform(2.5, 4.0);
    trace = inject_anomaly(std::move(trace), ev);
    t += ev.duration;
  }
  return trace;
}

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::query: return "query";
    case NodeKind::table: return "table";
    case NodeKind::index: return "index";
    case NodeKind::connection_pool: return "connection_pool";
    case NodeKind::disk: return "disk";
  }
  return "query";
}

NodeKind parse_node_kind(const std::string& s) {
  for (std::size_t k = 0; k < kNodeKindCount; ++k) {
    if (to_string(static_cast<NodeKind>(k)) == s) return static_cast<NodeKind>(k);
  }
  throw SchemaError("unknown node kind '" + s + "'");
}

ComponentGraph::ComponentGraph(std::vector<ComponentNode> nodes, std::vector<DependencyEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), in_(nodes_.size()) {
  std::set<std::string> ids;
  std::size_t width = nodes_.empty() ? 0 : nodes_[0].staticFeatures.size();
  for (const auto& n : nodes_) {
    if (!ids.insert(n.id).second) throw InputError("graph: duplicate node id '" + n.id + "'");
    if (n.staticFeatures.size() != width) {
      throw InputError("graph: node '" + n.id + "' has inconsistent static feature width");
    }
  }
  for (const auto& e : edges_) {
    if (e.from >= nodes_.size() || e.to >= nodes_.size()) {
      throw InputError("graph: edge endpoint out of range");
    }
    if (e.from == e.to) throw InputError("graph: self-edge on '" + nodes_[e.from].id + "'");
    if (!(e.weight > 0.0 && e.weight <= 1.0)) {
      throw InputError("graph: edge weight must lie in (0, 1]");
    }
    in_[e.to].emplace_back(e.from, e.weight);
  }
}

std::optional<std::size_t> ComponentGraph::find(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return i;
  }
  return std::nullopt;
}

std::size_t ComponentGraph::index_of(const std::string& id) const {
  auto i = find(id);
  if (!i) throw InputError("unknown node '" + id + "'");
  return *i;
}

std::size_t ComponentGraph::static_width() const {
  return nodes_.empty() ? 0 : nodes_[0].staticFeatures.size();
}

ComponentGraph random_component_graph(const GraphSpec& spec, std::uint64_t seed) {
  if (spec.disks == 0 || spec.tables == 0) {
    throw InputError("random_component_graph: need at least one disk and one table");
  }
  if (!(spec.minWeight > 0.0 && spec.minWeight <= 1.0)) {
    throw InputError("random_component_graph: minWeight must lie in (0, 1]");
  }
  Rng rng(seed);
  std::vector<ComponentNode> nodes;
  auto add = [&](NodeKind kind, std::size_t count, const char* prefix) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < count; ++i) {
      idx.push_back(nodes.size());
      nodes.push_back({std::string(prefix) + std::to_string(i), kind,
                       {rng.uniform(0.5, 1.0), rng.uniform(0.0, 1.0)}});
    }
    return idx;
  };
  const auto disks = add(NodeKind::disk, spec.disks, "disk");
  const auto tables = add(NodeKind::table, spec.tables, "table");
  const auto indexes = add(NodeKind::index, spec.indexes, "index");
  const auto pools = add(NodeKind::connection_pool, spec.pools, "pool");
  const auto queries = add(NodeKind::query, spec.queries, "query");

  std::vector<DependencyEdge> edges;
  auto weight = [&] { return spec.minWeight >= 1.0 ? 1.0 : rng.uniform(spec.minWeight, 1.0); };
  auto pick = [&](const std::vector<std::size_t>& from) { return from[rng.below(from.size())]; };
  for (std::size_t t : tables) edges.push_back({pick(disks), t, weight()});
  for (std::size_t i : indexes) edges.push_back({pick(tables), i, weight()});
  std::vector<std::size_t> sources = tables;
  sources.insert(sources.end(), indexes.begin(), indexes.end());
  for (std::size_t q : queries) {
    const std::size_t fanin = 1 + rng.below(std::min<std::size_t>(3, sources.size()));
    std::vector<std::size_t> pool = sources;
    for (std::size_t k = 0; k < fanin; ++k) {
      const std::size_t j = rng.below(pool.size());
      edges.push_back({pool[j], q, weight()});
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    }
    if (!pools.empty()) edges.push_back({pick(pools), q, weight()});
  }
  return ComponentGraph(std::move(nodes), std::move(edges));
}

namespace {

MetricArray nominal_metrics(NodeKind kind) {
  switch (kind) {
    case NodeKind::query: return {0.3, 0.2, 20.0, 50.0, 300.0};
    case NodeKind::table: return {0.2, 0.5, 5.0, 400.0, 200.0};
    case NodeKind::index: return {0.1, 0.3, 2.0, 200.0, 250.0};
    case NodeKind::connection_pool: return {0.15, 0.2, 1.0, 10.0, 500.0};
    case NodeKind::disk: return {0.2, 0.1, 8.0, 800.0, 100.0};
  }
  return {};
}

}  // namespace

std::vector<Trace> healthy_node_telemetry(const ComponentGraph& graph, std::size_t horizon,
                                          std::uint64_t seed) {
  std::vector<Trace> out(graph.size(), Trace(horizon));
  for (std::size_t v = 0; v < graph.size(); ++v) {
    Rng rng(derive_seed(seed, v));
    const MetricArray base = nominal_metrics(graph.nodes()[v].kind);
    for (std::size_t t = 0; t < horizon; ++t) {
      TelemetryWindow& w = out[v][t];
      w.index = t;
      for (std::size_t m = 0; m < kMetricCount; ++m) {
        w.set_metric(static_cast<Metric>(m), base[m] * (1.0 + 0.05 * rng.normal()));
      }
      clamp_window(w);
    }
  }
  return out;
}

CascadeTrace propagate_cascade(const ComponentGraph& graph, const std::string& seedNode,
                               std::uint64_t onset, std::size_t horizon, double thresholdC,
                               std::uint64_t seed) {
  const auto seed_idx = graph.find(seedNode);
  if (!seed_idx) throw InputError("propagate_cascade: unknown seed node '" + seedNode + "'");
  if (!(thresholdC > 0.0 && thresholdC <= 1.0)) {
    throw InputError("propagate_cascade: threshold must lie in (0, 1]");
  }
  if (horizon == 0 || onset >= horizon) {
    throw InputError("propagate_cascade: onset must fall inside the horizon");
  }
  CascadeTrace out;
  out.graph = graph;
  out.seedNode = *seed_idx;
  out.onset = onset;
  out.failureTime.assign(graph.size(), std::nullopt);
  out.failureTime[*seed_idx] = onset;

  const std::size_t n = graph.size();
  std::vector<double> in_total(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (auto [u, w] : graph.in_edges(v)) in_total[v] += w;

  for (std::uint64_t t = onset + 1; t < horizon; ++t) {
    std::vector<std::size_t> newly;
    for (std::size_t v = 0; v < n; ++v) {
      if (out.failureTime[v] || in_total[v] <= 0.0) continue;
      double failed = 0.0;
      for (auto [u, w] : graph.in_edges(v)) {
        if (out.failureTime[u] && *out.failureTime[u] < t) failed += w;
      }
      if (failed / in_total[v] >= thresholdC) newly.push_back(v);
    }
    for (std::size_t v : newly) out.failureTime[v] = t;
  }

  out.nodeTelemetry = healthy_node_telemetry(graph, horizon, seed);
  for (std::size_t v = 0; v < n; ++v) {
    if (!out.failureTime[v]) continue;
    for (std::size_t t = *out.failureTime[v]; t < horizon; ++t) {
      TelemetryWindow& w = out.nodeTelemetry[v][t];
      w.latencyMs = 5.0 * w.latencyMs + 50.0;
      w.qps *= 0.2;
      clamp_window(w);
      w.label = 1;
    }
  }
  return out;
}

CascadeTrace sample_cascade(const ComponentGraph& graph, std::uint64_t onset, std::size_t horizon,
                            double thresholdC, std::uint64_t seed) {
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const NodeKind k = graph.nodes()[i].kind;
    if (k == NodeKind::disk || k == NodeKind::table) roots.push_back(i);
  }
  if (roots.empty()) {
    for (std::size_t i = 0; i < graph.size(); ++i) roots.push_back(i);
  }
  if (roots.empty()) throw InputError("sample_cascade: empty graph");
  Rng rng(seed);
  CascadeTrace out;
  for (std::size_t attempt = 0; attempt < 20; ++attempt) {
    const std::size_t r = roots[rng.below(roots.size())];
    out = propagate_cascade(graph, graph.nodes()[r].id, onset, horizon, thresholdC,
                            derive_seed(seed, attempt));
    std::size_t failed = 0;
    for (const auto& f : out.failureTime) failed += f ? 1 : 0;
    if (failed > 1) break;
  }
  return out;
}

std::vector<double> window_features(const Trace& trace, std::size_t end, std::size_t w) {
  if (w == 0 || end >= trace.size() || end + 1 < w) {
    throw InputError("window_features: window of " + std::to_string(w) + " ending at " +
                     std::to_string(end) + " does not fit the trace");
  }
  std::vector<double> f;
  f.reserve(w * kMetricCount);
  for (std::size_t t = end + 1 - w; t <= end; ++t) {
    const MetricArray m = trace[t].metrics();
    for (std::size_t k = 0; k < kMetricCount; ++k) f.push_back(m[k] / kFeatureScale[k]);
  }
  return f;
}

std::vector<Task> make_tasks(const std::vector<WorkloadPattern>& patterns, std::size_t nSupport,
                             std::size_t nQuery, std::size_t windowW, std::uint64_t seed) {
  if (nSupport < 2 || nQuery < 2) {
    throw InputError("make_tasks: support and query need at least 2 examples for both classes");
  }
  if (windowW == 0) throw InputError("make_tasks: window width must be >= 1");
  constexpr std::size_t kAttempts = 8;
  const std::size_t need_anom = (nSupport + 1) / 2 + (nQuery + 1) / 2;
  const std::size_t need_norm = nSupport / 2 + nQuery / 2;

  std::vector<Task> tasks;
  tasks.reserve(patterns.size());
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const WorkloadPattern& pattern = patterns[p];
    const std::uint64_t pseed = derive_seed(seed, p);
    bool done = false;
    for (std::size_t attempt = 0; attempt < kAttempts && !done; ++attempt) {
      const std::size_t ticks = std::max<std::size_t>(512, 16 * (nSupport + nQuery)) << (attempt / 2);
      const Trace trace = generate_trace(pattern, derive_seed(pseed, attempt), ticks);
      std::vector<std::size_t> anom, norm;
      for (std::size_t t = windowW - 1; t < trace.size(); ++t) {
        (trace[t].label ? anom : norm).push_back(t);
      }
      if (anom.size() < need_anom || norm.size() < need_norm) continue;
      Rng rng(derive_seed(pseed, "sample" + std::to_string(attempt)));
      auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
      };
      shuffle(anom);
      shuffle(norm);
      std::size_t ai = 0, ni = 0;
      auto draw = [&](std::size_t n) {
        std::vector<Example> out;
        const std::size_t na = (n + 1) / 2;
        for (std::size_t i = 0; i < na; ++i) {
          out.push_back({window_features(trace, anom[ai++], windowW), 1});
        }
        for (std::size_t i = na; i < n; ++i) {
          out.push_back({window_features(trace, norm[ni++], windowW), 0});
        }
        for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
        return out;
      };
      Task task;
      task.sourcePatternId = pattern.patternId;
      task.support = draw(nSupport);
      task.query = draw(nQuery);
      tasks.push_back(std::move(task));
      done = true;
    }
    if (!done) {
      throw GenerationError("make_tasks: pattern '" + pattern.patternId +
                            "' did not yield enough anomalous and normal windows after " +
                            std::to_string(kAttempts) + " attempts");
    }
  }
  return tasks;
}

std::vector<double> interpolate(const std::vector<double>& u, const std::vector<double>& v,
                                double weight) {
  if (u.size() != v.size()) throw InputError("interpolate: width mismatch");
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = (1.0 - weight) * u[i] + weight * v[i];
  return out;
}

std::vector<Task> augment_tasks(const std::vector<Task>& tasks, double jitterStd,
                                std::size_t mixCount, std::uint64_t seed) {
  if (tasks.empty()) throw InputError("augment_tasks: no tasks");
  if (!(jitterStd >= 0.0)) throw InputError("augment_tasks: jitterStd must be >= 0");
  std::vector<Task> out = tasks;
  Rng jitter(derive_seed(seed, "jitter"));
  for (const Task& t : tasks) {
    Task copy = t;
    copy.sourcePatternId = t.sourcePatternId + "~jitter";
    for (auto* split : {&copy.support, &copy.query}) {
      for (Example& e : *split) {
        for (double& f : e.features) f += jitterStd > 0.0 ? jitter.normal(0.0, jitterStd) : 0.0;
      }
    }
    out.push_back(std::move(copy));
  }
  Rng mix(derive_seed(seed, "mix"));
  for (std::size_t k = 0; k < mixCount; ++k) {
    const std::size_t a = mix.below(tasks.size());
    std::size_t b = a;
    if (tasks.size() > 1) {
      b = mix.below(tasks.size() - 1);
      if (b >= a) ++b;
    }
    const double lambda = mix.uniform();
    Task blended;
    blended.sourcePatternId = "mix(" + tasks[a].sourcePatternId + "," + tasks[b].sourcePatternId + ")";
    auto blend = [&](const std::vector<Example>& from, const std::vector<Example>& with) {
      std::vector<Example> res;
      for (const Example& e : from) {
        std::vector<std::size_t> same;
        for (std::size_t j = 0; j < with.size(); ++j)
          if (with[j].label == e.label) same.push_back(j);
        if (same.empty()) {
          res.push_back(e);
          continue;
        }
        const Example& partner = with[same[mix.below(same.size())]];
        res.push_back({interpolate(e.features, partner.features, lambda), e.label});
      }
      return res;
    };
    blended.support = blend(tasks[a].support, tasks[b].support);
    blended.query = blend(tasks[a].query, tasks[b].query);
    out.push_back(std::move(blended));
  }
  return out;
}

}  // namespace selfheal
