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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selfheal/autodiff.hpp"
#include "selfheal/mlp.hpp"
#include "selfheal/simulator.hpp"
#include "selfheal/tensor.hpp"

namespace selfheal {

// h_v^(0) = [one-hot kind (5) | static features | 5 scaled metrics].
std::size_t embedding_width(const ComponentGraph& graph);

struct NodeEmbeddings {
  std::size_t layerIndex = 0;
  Tensor values;  // [nodes, width], rows in graph node order
  std::vector<std::string> ids;

  std::size_t width() const { return values.cols(); }
  std::vector<double> of(const std::string& id) const;
};

NodeEmbeddings init_embeddings(const ComponentGraph& graph, const std::vector<Trace>& nodeTelemetry,
                               std::size_t tick);

// Message sets N(v) = in-neighbours of v plus v itself, in edge order with v
// last.
std::shared_ptr<const ad::NeighborLists> message_neighbors(const ComponentGraph& graph);

// h_v' = act(W * sum_{u in N(v)} h_u + b) with the plain, unnormalised sum.
// weight is [out, in], bias [out].
NodeEmbeddings gnn_layer(const ComponentGraph& graph, const NodeEmbeddings& emb, const Tensor& weight,
                         const Tensor& bias, Activation activation);

struct GnnArch {
  std::size_t layers = 2;
  std::size_t hidden = 16;
};

// Parameter names: "mp<l>.weight" [hidden, in], "mp<l>.bias" [hidden] for
// each message-passing layer (ReLU), then "readout.weight" [1, hidden] and
// "readout.bias" [1] (sigmoid).
struct GnnParams {
  ParamSet params;
  GnnArch arch;
  bool operator==(const GnnParams& o) const {
    return params == o.params && arch.layers == o.arch.layers && arch.hidden == o.arch.hidden;
  }
};

GnnParams init_gnn(std::size_t inputWidth, const GnnArch& arch, std::uint64_t seed);

// Per-node failure probabilities for one snapshot.
std::vector<double> node_failure_probabilities(const ComponentGraph& graph, const NodeEmbeddings& emb0,
                                               const GnnParams& params);

struct FailurePrediction {
  std::vector<std::string> ids;
  std::vector<double> probability;                        // max over the horizon
  std::vector<std::optional<std::uint64_t>> predictedFailTick;
  std::size_t horizon = 0;
};

// Runs the network at every tick in [0, horizon) and flags each node at the
// first tick whose probability is >= tauG.
FailurePrediction predict_failures(const ComponentGraph& graph, const std::vector<Trace>& telemetry,
                                   const GnnParams& params, std::size_t horizon, double tauG);

// All snapshots of a dataset stacked into one disconnected graph so a full
// batch is a single forward pass. Label 1 iff the node fails within the
// trace's horizon.
struct GnnBatch {
  Tensor features;
  std::shared_ptr<const ad::NeighborLists> neighbors;
  std::vector<double> labels;
};

GnnBatch make_gnn_batch(const std::vector<CascadeTrace>& dataset);
ad::Var gnn_forward(const std::map<std::string, ad::Var>& vars, ad::Var features,
                    const std::shared_ptr<const ad::NeighborLists>& neighbors, const GnnArch& arch);
double gnn_loss(const GnnParams& params, const GnnBatch& batch);
ParamSet gnn_loss_gradient(const GnnParams& params, const GnnBatch& batch);

struct GnnTrainResult {
  GnnParams params;
  std::vector<double> lossCurve;  // loss before each epoch's update, then the final loss
};

// Full-batch gradient descent on node-level BCE.
GnnTrainResult train_gnn(const std::vector<CascadeTrace>& dataset, const GnnArch& arch,
                         std::size_t epochs, double lr, std::uint64_t seed);

// Mean lead time in seconds over nodes that truly fail and were flagged
// strictly before failing; nullopt when no node qualifies.
std::optional<double> mttfp(const FailurePrediction& pred, const CascadeTrace& truth, double tickSeconds);

struct CascadeScore {
  double accuracy = 0.0;        // flagged-within-horizon vs fails-within-horizon, over nodes
  double falseAlarmRate = 0.0;  // flagged among nodes that never fail
  double missRate = 0.0;        // never flagged among nodes that fail
  double lateRate = 0.0;        // flagged at or after the failure tick, among failing nodes
  std::size_t nodes = 0;
};

CascadeScore score_prediction(const FailurePrediction& pred, const CascadeTrace& truth);

void save_gnn(std::ostream& out, const GnnParams& params);
GnnParams load_gnn(std::istream& in);

}  // namespace selfheal
