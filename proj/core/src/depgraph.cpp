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

#include "selfheal/depgraph.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "selfheal/detector.hpp"
#include "selfheal/error.hpp"
#include "selfheal/rng.hpp"

namespace selfheal {

std::size_t embedding_width(const ComponentGraph& graph) {
  return kNodeKindCount + graph.static_width() + kMetricCount;
}

std::vector<double> NodeEmbeddings::of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) {
      const std::size_t d = width();
      return {values.values().begin() + i * d, values.values().begin() + (i + 1) * d};
    }
  }
  throw InputError("no embedding for node '" + id + "'");
}

namespace {

void append_snapshot(const ComponentGraph& graph, const std::vector<Trace>& telemetry, std::size_t tick,
                     std::vector<double>& out) {
  if (telemetry.size() != graph.size()) {
    throw InputError("telemetry covers " + std::to_string(telemetry.size()) + " of " +
                     std::to_string(graph.size()) + " nodes");
  }
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const ComponentNode& node = graph.nodes()[v];
    if (tick >= telemetry[v].size()) {
      throw InputError("missing telemetry for node '" + node.id + "' at tick " + std::to_string(tick));
    }
    for (std::size_t k = 0; k < kNodeKindCount; ++k) {
      out.push_back(static_cast<std::size_t>(node.kind) == k ? 1.0 : 0.0);
    }
    out.insert(out.end(), node.staticFeatures.begin(), node.staticFeatures.end());
    const MetricArray m = telemetry[v][tick].metrics();
    for (std::size_t k = 0; k < kMetricCount; ++k) out.push_back(m[k] / kFeatureScale[k]);
  }
}

std::vector<std::string> node_ids(const ComponentGraph& graph) {
  std::vector<std::string> ids;
  for (const auto& n : graph.nodes()) ids.push_back(n.id);
  return ids;
}

std::string mp_weight(std::size_t l) { return "mp" + std::to_string(l) + ".weight"; }
std::string mp_bias(std::size_t l) { return "mp" + std::to_string(l) + ".bias"; }

}  // namespace

NodeEmbeddings init_embeddings(const ComponentGraph& graph, const std::vector<Trace>& nodeTelemetry,
                               std::size_t tick) {
  std::vector<double> v;
  v.reserve(graph.size() * embedding_width(graph));
  append_snapshot(graph, nodeTelemetry, tick, v);
  NodeEmbeddings e;
  e.layerIndex = 0;
  e.values = Tensor(Shape{graph.size(), embedding_width(graph)}, std::move(v));
  e.ids = node_ids(graph);
  return e;
}

std::shared_ptr<const ad::NeighborLists> message_neighbors(const ComponentGraph& graph) {
  auto lists = std::make_shared<ad::NeighborLists>(graph.size());
  for (std::size_t v = 0; v < graph.size(); ++v) {
    for (auto [u, w] : graph.in_edges(v)) (*lists)[v].push_back(u);
    (*lists)[v].push_back(v);
  }
  return lists;
}

namespace {

ad::Var apply(Activation a, ad::Var h) {
  switch (a) {
    case Activation::relu: return ad::relu(h);
    case Activation::sigmoid: return ad::sigmoid(h);
    case Activation::linear: break;
  }
  return h;
}

}  // namespace

NodeEmbeddings gnn_layer(const ComponentGraph& graph, const NodeEmbeddings& emb, const Tensor& weight,
                         const Tensor& bias, Activation activation) {
  if (emb.values.rows() != graph.size()) {
    throw ConfigError("gnn_layer: embeddings for " + std::to_string(emb.values.rows()) +
                      " nodes, graph has " + std::to_string(graph.size()));
  }
  if (weight.rank() != 2 || weight.cols() != emb.width() || bias.rank() != 1 ||
      bias.size() != weight.rows()) {
    throw ConfigError("gnn_layer: weight " + shape_string(weight.shape()) + " and bias " +
                      shape_string(bias.shape()) + " do not fit embeddings of width " +
                      std::to_string(emb.width()));
  }
  ad::Tape tape;
  const ad::Var h = tape.constant(emb.values);
  const ad::Var agg = ad::neighbor_sum(h, message_neighbors(graph));
  const ad::Var out = apply(activation, ad::linear(agg, tape.constant(weight), tape.constant(bias)));
  NodeEmbeddings next;
  next.layerIndex = emb.layerIndex + 1;
  next.values = out.value();
  next.ids = emb.ids;
  return next;
}

GnnParams init_gnn(std::size_t inputWidth, const GnnArch& arch, std::uint64_t seed) {
  if (arch.layers == 0 || arch.hidden == 0) throw ConfigError("init_gnn: layers and hidden must be > 0");
  Rng rng(seed);
  GnnParams g;
  g.arch = arch;
  std::size_t fan_in = inputWidth;
  auto uniform = [&](std::size_t n, std::size_t fan) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan));
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-r, r);
    return v;
  };
  for (std::size_t l = 0; l < arch.layers; ++l) {
    g.params.emplace(mp_weight(l), Tensor(Shape{arch.hidden, fan_in}, uniform(arch.hidden * fan_in, fan_in)));
    g.params.emplace(mp_bias(l), Tensor(Shape{arch.hidden}, 0.0));
    fan_in = arch.hidden;
  }
  g.params.emplace("readout.weight", Tensor(Shape{1, arch.hidden}, uniform(arch.hidden, arch.hidden)));
  g.params.emplace("readout.bias", Tensor(Shape{1}, 0.0));
  return g;
}

ad::Var gnn_forward(const std::map<std::string, ad::Var>& vars, ad::Var features,
                    const std::shared_ptr<const ad::NeighborLists>& neighbors, const GnnArch& arch) {
  auto get = [&](const std::string& name) {
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("GNN parameter " + name + " missing");
    return it->second;
  };
  ad::Var h = features;
  for (std::size_t l = 0; l < arch.layers; ++l) {
    const ad::Var agg = ad::neighbor_sum(h, neighbors);
    h = ad::relu(ad::linear(agg, get(mp_weight(l)), get(mp_bias(l))));
  }
  return ad::sigmoid(ad::linear(h, get("readout.weight"), get("readout.bias")));
}

namespace {

std::map<std::string, ad::Var> constants(ad::Tape& tape, const ParamSet& params) {
  std::map<std::string, ad::Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, tape.constant(t));
  return vars;
}

}  // namespace

std::vector<double> node_failure_probabilities(const ComponentGraph& graph, const NodeEmbeddings& emb0,
                                               const GnnParams& params) {
  ad::Tape tape;
  const auto vars = constants(tape, params.params);
  const ad::Var p = gnn_forward(vars, tape.constant(emb0.values), message_neighbors(graph), params.arch);
  const auto v = p.value().values();
  return {v.begin(), v.end()};
}

FailurePrediction predict_failures(const ComponentGraph& graph, const std::vector<Trace>& telemetry,
                                   const GnnParams& params, std::size_t horizon, double tauG) {
  if (horizon == 0) throw InputError("predict_failures: horizon must be >= 1");
  FailurePrediction pred;
  pred.ids = node_ids(graph);
  pred.horizon = horizon;
  pred.probability.assign(graph.size(), 0.0);
  pred.predictedFailTick.assign(graph.size(), std::nullopt);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto probs = node_failure_probabilities(graph, init_embeddings(graph, telemetry, t), params);
    for (std::size_t v = 0; v < graph.size(); ++v) {
      pred.probability[v] = std::max(pred.probability[v], probs[v]);
      if (!pred.predictedFailTick[v] && probs[v] >= tauG) pred.predictedFailTick[v] = t;
    }
  }
  return pred;
}

GnnBatch make_gnn_batch(const std::vector<CascadeTrace>& dataset) {
  if (dataset.empty()) throw InputError("GNN dataset is empty");
  GnnBatch batch;
  auto lists = std::make_shared<ad::NeighborLists>();
  std::vector<double> feats;
  const std::size_t width = embedding_width(dataset[0].graph);
  for (const CascadeTrace& trace : dataset) {
    if (embedding_width(trace.graph) != width) throw InputError("GNN dataset mixes embedding widths");
    const auto local = message_neighbors(trace.graph);
    const std::size_t horizon = trace.horizon();
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t offset = lists->size();
      for (const auto& l : *local) {
        std::vector<std::size_t> shifted;
        for (std::size_t j : l) shifted.push_back(j + offset);
        lists->push_back(std::move(shifted));
      }
      append_snapshot(trace.graph, trace.nodeTelemetry, t, feats);
      for (std::size_t v = 0; v < trace.graph.size(); ++v) {
        batch.labels.push_back(trace.failureTime[v] && *trace.failureTime[v] < horizon ? 1.0 : 0.0);
      }
    }
  }
  batch.features = Tensor(Shape{lists->size(), width}, std::move(feats));
  batch.neighbors = std::move(lists);
  return batch;
}

double gnn_loss(const GnnParams& params, const GnnBatch& batch) {
  ad::Tape tape;
  const auto vars = constants(tape, params.params);
  const ad::Var p = gnn_forward(vars, tape.constant(batch.features), batch.neighbors, params.arch);
  return ad::bce(p, batch.labels).value().item();
}

ParamSet gnn_loss_gradient(const GnnParams& params, const GnnBatch& batch) {
  ad::Tape tape;
  const auto vars = tape.watch(params.params);
  const ad::Var p = gnn_forward(vars, tape.constant(batch.features), batch.neighbors, params.arch);
  return tape.gradient(ad::bce(p, batch.labels), params.params);
}

GnnTrainResult train_gnn(const std::vector<CascadeTrace>& dataset, const GnnArch& arch,
                         std::size_t epochs, double lr, std::uint64_t seed) {
  if (dataset.empty()) throw InputError("train_gnn: dataset is empty");
  if (!(lr >= 0.0)) throw ConfigError("train_gnn: lr must be >= 0");
  GnnTrainResult result;
  result.params = init_gnn(embedding_width(dataset[0].graph), arch, seed);
  if (epochs == 0) return result;
  const GnnBatch batch = make_gnn_batch(dataset);
  std::size_t epoch = 0;
  try {
    for (; epoch < epochs; ++epoch) {
      ad::Tape tape;
      const auto vars = tape.watch(result.params.params);
      const ad::Var p = gnn_forward(vars, tape.constant(batch.features), batch.neighbors, arch);
      const ad::Var loss = ad::bce(p, batch.labels);
      result.lossCurve.push_back(loss.value().item());
      result.params.params = sgd_step(result.params.params, tape.gradient(loss, result.params.params), lr);
    }
    result.lossCurve.push_back(gnn_loss(result.params, batch));
  } catch (const NonFiniteError& e) {
    throw TrainingError(epoch, std::string("GNN training diverged: ") + e.what());
  }
  return result;
}

namespace {

void require_same_graph(const FailurePrediction& pred, const CascadeTrace& truth) {
  bool same = pred.ids.size() == truth.graph.size();
  for (std::size_t i = 0; same && i < pred.ids.size(); ++i) same = pred.ids[i] == truth.graph.nodes()[i].id;
  if (!same) throw InputError("prediction and cascade trace describe different graphs");
}

}  // namespace

std::optional<double> mttfp(const FailurePrediction& pred, const CascadeTrace& truth, double tickSeconds) {
  if (!(tickSeconds > 0.0)) throw InputError("mttfp: tickSeconds must be > 0");
  require_same_graph(pred, truth);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < pred.ids.size(); ++v) {
    const auto& fail = truth.failureTime[v];
    const auto& flag = pred.predictedFailTick[v];
    if (!fail || !flag || *flag >= *fail) continue;
    total += static_cast<double>(*fail - *flag) * tickSeconds;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

CascadeScore score_prediction(const FailurePrediction& pred, const CascadeTrace& truth) {
  require_same_graph(pred, truth);
  CascadeScore s;
  std::size_t correct = 0, failing = 0, healthy = 0, false_alarms = 0, misses = 0, late = 0;
  for (std::size_t v = 0; v < pred.ids.size(); ++v) {
    const bool fails = truth.failureTime[v] && *truth.failureTime[v] < pred.horizon;
    const bool flagged = pred.predictedFailTick[v].has_value();
    if (fails == flagged) ++correct;
    if (fails) {
      ++failing;
      if (!flagged) ++misses;
      else if (*pred.predictedFailTick[v] >= *truth.failureTime[v]) ++late;
    } else {
      ++healthy;
      if (flagged) ++false_alarms;
    }
  }
  s.nodes = pred.ids.size();
  s.accuracy = s.nodes ? static_cast<double>(correct) / static_cast<double>(s.nodes) : 0.0;
  s.falseAlarmRate = healthy ? static_cast<double>(false_alarms) / static_cast<double>(healthy) : 0.0;
  s.missRate = failing ? static_cast<double>(misses) / static_cast<double>(failing) : 0.0;
  s.lateRate = failing ? static_cast<double>(late) / static_cast<double>(failing) : 0.0;
  return s;
}

void save_gnn(std::ostream& out, const GnnParams& params) {
  out << "selfheal-gnn 1\n";
  out << "arch " << params.arch.layers << ' ' << params.arch.hidden << '\n';
  write_params(out, params.params);
  out << "end\n";
}

GnnParams load_gnn(std::istream& in) {
  std::string magic, kw;
  int version = 0;
  if (!(in >> magic >> version) || magic != "selfheal-gnn" || version != 1) {
    throw SchemaError("not a selfheal-gnn v1 file");
  }
  GnnParams g;
  if (!(in >> kw >> g.arch.layers >> g.arch.hidden) || kw != "arch") throw SchemaError("gnn file: bad arch line");
  g.params = read_params(in);
  if (!(in >> kw) || kw != "end") throw SchemaError("gnn file: missing end marker");
  return g;
}

}  // namespace selfheal
