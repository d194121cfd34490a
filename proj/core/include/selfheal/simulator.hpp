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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace selfheal {

inline constexpr std::size_t kMetricCount = 5;

enum class Metric { cpu = 0, memory, latency, io, qps };

// Column name used in CSV traces ("cpu", "memory", "latencyMs", "ioOps", "qps").
std::string metric_column(Metric m);

using MetricArray = std::array<double, kMetricCount>;

// Divisors that bring each metric to roughly unit scale when building
// feature vectors: cpu and memory are fractions, latency is /100 ms, io and
// qps are /1000.
inline constexpr MetricArray kFeatureScale = {1.0, 1.0, 100.0, 1000.0, 1000.0};

struct TelemetryWindow {
  std::uint64_t index = 0;
  double cpu = 0.0;
  double memory = 0.0;
  double latencyMs = 0.0;
  double ioOps = 0.0;
  double qps = 0.0;
  int label = 0;

  double metric(Metric m) const;
  void set_metric(Metric m, double v);
  MetricArray metrics() const;
  bool operator==(const TelemetryWindow&) const = default;
};

using Trace = std::vector<TelemetryWindow>;

// Clamps cpu/memory into [0,1] and the rest to >= 0. Returns true if any
// field changed.
bool clamp_window(TelemetryWindow& w);

struct WorkloadPattern {
  std::string patternId;
  MetricArray baseRates{};
  MetricArray diurnalAmplitude{};  // absolute units, same as baseRates
  MetricArray noiseStd{};
  double anomalyRate = 0.0;        // expected fraction of anomalous ticks
  std::size_t periodTicks = 96;
};

void validate(const WorkloadPattern& p);

// Draws a pattern from the synthetic family used by the harness: base rates
// within +/-30% of a central workload, mild diurnal swing, 2-5% noise.
WorkloadPattern random_pattern(const std::string& id, std::uint64_t seed,
                               double anomalyRate = 0.1);

enum class AnomalyKind { cpu_spike, memory_leak, lock_contention, io_saturation, cascade_seed };

std::string to_string(AnomalyKind k);
AnomalyKind parse_anomaly_kind(const std::string& s);
// Metrics an anomaly multiplies: cpu_spike -> cpu, memory_leak -> memory,
// lock_contention -> latency, io_saturation -> io, cascade_seed -> latency.
Metric affected_metric(AnomalyKind k);

struct AnomalyEvent {
  AnomalyKind kind = AnomalyKind::cpu_spike;
  std::uint64_t onset = 0;
  std::uint64_t duration = 1;
  double magnitude = 2.0;
  std::string originNode;  // cascade_seed only
};

// Baseline + diurnal sinusoid + Gaussian noise, clamped, then anomalies
// placed by an alternating normal-gap / event renewal process whose expected
// anomalous fraction is pattern.anomalyRate. Deterministic in all arguments.
Trace generate_trace(const WorkloadPattern& pattern, std::uint64_t seed, std::size_t ticks);

// Multiplies the affected metric by magnitude on [onset, onset+duration),
// clamps, and labels those ticks anomalous. Throws InputError if the event
// does not fit or is malformed.
Trace inject_anomaly(Trace trace, const AnomalyEvent& event);

inline constexpr std::size_t kNodeKindCount = 5;
enum class NodeKind { query = 0, table, index, connection_pool, disk };

std::string to_string(NodeKind k);
NodeKind parse_node_kind(const std::string& s);

struct ComponentNode {
  std::string id;
  NodeKind kind = NodeKind::query;
  std::vector<double> staticFeatures;
  bool operator==(const ComponentNode&) const = default;
};

// Edge (from -> to) means "to depends on from"; failures flow along it.
struct DependencyEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 1.0;
  bool operator==(const DependencyEdge&) const = default;
};

class ComponentGraph {
 public:
  ComponentGraph() = default;
  // Validates unique ids, in-range endpoints, no self-edges, weights in (0,1].
  ComponentGraph(std::vector<ComponentNode> nodes, std::vector<DependencyEdge> edges);

  const std::vector<ComponentNode>& nodes() const noexcept { return nodes_; }
  const std::vector<DependencyEdge>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;  // throws InputError
  // (source index, weight) pairs for edges ending at node i, in edge order.
  const std::vector<std::pair<std::size_t, double>>& in_edges(std::size_t i) const {
    return in_[i];
  }
  std::size_t static_width() const;

  bool operator==(const ComponentGraph& o) const {
    return nodes_ == o.nodes_ && edges_ == o.edges_;
  }

 private:
  std::vector<ComponentNode> nodes_;
  std::vector<DependencyEdge> edges_;
  std::vector<std::vector<std::pair<std::size_t, double>>> in_;
};

struct GraphSpec {
  std::size_t disks = 2;
  std::size_t tables = 4;
  std::size_t indexes = 3;
  std::size_t pools = 1;
  std::size_t queries = 6;
  double minWeight = 1.0;  // weights drawn from [minWeight, 1]
};

// Layered dependency graph: disk -> table -> index, {table, index, pool} ->
// query. Each node carries two static features (capacity, criticality).
ComponentGraph random_component_graph(const GraphSpec& spec, std::uint64_t seed);

struct CascadeTrace {
  ComponentGraph graph;
  std::size_t seedNode = 0;
  std::uint64_t onset = 0;
  std::vector<std::optional<std::uint64_t>> failureTime;  // per node index
  std::vector<Trace> nodeTelemetry;                       // per node, horizon ticks

  std::optional<std::uint64_t> failure_time(const std::string& id) const {
    return failureTime[graph.index_of(id)];
  }
  std::size_t horizon() const { return nodeTelemetry.empty() ? 0 : nodeTelemetry[0].size(); }
};

// Nominal per-kind telemetry with 5% noise, no failures.
std::vector<Trace> healthy_node_telemetry(const ComponentGraph& graph, std::size_t horizon,
                                          std::uint64_t seed);

// Discrete-time weighted linear-threshold cascade. The seed fails at onset;
// at each later tick a healthy node fails when the weight of its failed
// in-neighbours (as of the previous tick) divided by its total in-weight is
// >= thresholdC. Failed nodes stay failed and their telemetry degrades
// (latency x5 + 50 ms, qps x0.2, label 1) from the failure tick on.
CascadeTrace propagate_cascade(const ComponentGraph& graph, const std::string& seedNode,
                               std::uint64_t onset, std::size_t horizon, double thresholdC,
                               std::uint64_t seed);

// Cascade from a disk or table seed chosen uniformly; the draw is repeated
// (up to 20 times) until at least one dependent fails as well, keeping the
// last draw if none does.
CascadeTrace sample_cascade(const ComponentGraph& graph, std::uint64_t onset, std::size_t horizon,
                            double thresholdC, std::uint64_t seed);

struct Example {
  std::vector<double> features;
  int label = 0;
  bool operator==(const Example&) const = default;
};

struct Task {
  std::vector<Example> support;
  std::vector<Example> query;
  std::string sourcePatternId;
};

// Flattened, scaled metrics of ticks [end-w+1, end]; tick-major, so feature
// 5*k + m is metric m of the k-th tick in the window.
std::vector<double> window_features(const Trace& trace, std::size_t end, std::size_t w);

// One task per pattern. Support and query are drawn from distinct window
// positions and are class balanced (ceil(n/2) anomalous). Throws
// GenerationError when a pattern cannot supply both classes after bounded
// resampling, InputError when nSupport or nQuery < 2.
std::vector<Task> make_tasks(const std::vector<WorkloadPattern>& patterns, std::size_t nSupport,
                             std::size_t nQuery, std::size_t windowW, std::uint64_t seed);

// Convex combination (1-weight)*u + weight*v.
std::vector<double> interpolate(const std::vector<double>& u, const std::vector<double>& v,
                                double weight);

// Returns originals, then one jittered copy of each (Gaussian feature noise,
// labels kept), then mixCount tasks interpolating same-label examples of
// random task pairs.
std::vector<Task> augment_tasks(const std::vector<Task>& tasks, double jitterStd,
                                std::size_t mixCount, std::uint64_t seed);

// Maps CSV column names to the fields "cpu", "memory", "latencyMs", "ioOps",
// "qps", "label".
using SchemaMap = std::map<std::string, std::string>;
SchemaMap identity_schema();

struct IngestResult {
  Trace windows;
  std::size_t clampCount = 0;                   // cells changed by clamping
  std::map<std::string, std::size_t> clampsByField;
};

IngestResult ingest_csv(const std::string& path, const SchemaMap& schema);
IngestResult ingest_csv(std::istream& in, const SchemaMap& schema);

// Header "index,cpu,memory,latencyMs,ioOps,qps,label", values at 6
// significant digits.
void write_trace_csv(std::ostream& out, const Trace& trace);

// Graph interchange file (JSON object with "format", "version", "nodes",
// "edges"). Unknown fields are rejected with SchemaError naming them.
void write_graph(std::ostream& out, const ComponentGraph& graph);
ComponentGraph read_graph(std::istream& in);

}  // namespace selfheal
