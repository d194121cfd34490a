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
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "selfheal/autodiff.hpp"
#include "selfheal/mlp.hpp"
#include "selfheal/simulator.hpp"
#include "selfheal/tensor.hpp"

namespace selfheal {

enum class MetaMode { first_order, exact_fd_oracle };

std::string to_string(MetaMode m);
MetaMode parse_meta_mode(const std::string& s);

struct MetaConfig {
  double alpha = 0.1;            // inner learning rate
  double beta = 0.05;            // meta learning rate
  std::size_t innerSteps = 5;    // K
  std::size_t metaBatch = 4;
  std::size_t metaIterations = 1000;
  MetaMode metaMode = MetaMode::first_order;
  // Adaptation-latency measurement: smallest k <= maxAdaptSteps whose
  // support loss is <= convergenceLoss.
  std::size_t maxAdaptSteps = 50;
  double convergenceLoss = 0.35;
  double fdStep = 1e-5;          // exact_fd_oracle only
  std::size_t threads = 1;       // per-task parallelism inside a meta-batch
};

void validate(const MetaConfig& cfg);

struct DetectorModel {
  ParamSet params;
  LayerSpec layers;
  double threshold = 0.5;
  bool operator==(const DetectorModel&) const = default;
};

// input -> 32 ReLU -> 16 ReLU -> 1 sigmoid unless hidden says otherwise.
LayerSpec detector_layers(const std::vector<std::size_t>& hidden = {32, 16});
DetectorModel make_detector(std::size_t inputWidth, std::uint64_t seed,
                            const std::vector<std::size_t>& hidden = {32, 16},
                            double threshold = 0.5);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp; fp += o.fp; fn += o.fn; tn += o.tn;
    return *this;
  }
  bool operator==(const Confusion&) const = default;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t adaptationSteps = 0;
  Confusion confusion;
};

// Precision and recall are 0 when their denominators are 0; f1 is 0 when
// P + R is 0.
EvalReport metrics_from_confusion(const Confusion& c, std::size_t adaptationSteps = 0);

using Dataset = std::vector<Example>;
using VarMap = std::map<std::string, ad::Var>;
// Builds a scalar loss on the tape from the watched parameters.
using TapedLoss = std::function<ad::Var(ad::Tape&, const VarMap&)>;

// Gradient of a taped loss at params.
ParamSet loss_gradient(const ParamSet& params, const TapedLoss& loss);

// Mean BCE of the network over data. Throws InputError on an empty set or a
// width mismatch.
double task_loss(const ParamSet& params, const LayerSpec& layers, const Dataset& data);
ad::Var task_loss(ad::Tape& tape, const VarMap& vars, const LayerSpec& layers, const Dataset& data);
TapedLoss dataset_loss(const LayerSpec& layers, const Dataset& data);

// K repetitions of theta <- theta - alpha * grad L(theta).
ParamSet inner_adapt(const ParamSet& params, const TapedLoss& loss, double alpha, std::size_t K);
ParamSet inner_adapt(const ParamSet& params, const LayerSpec& layers, const Dataset& support,
                     double alpha, std::size_t K);

// Sum over tasks of the gradient of the post-adaptation query loss. In
// first_order mode the inner-loop Jacobian is taken as the identity; in
// exact_fd_oracle mode the whole composition is differentiated by central
// differences (small models only). Summation follows task order.
ParamSet meta_gradient(const ParamSet& params, std::span<const Task> tasks, const MetaConfig& cfg,
                       const LayerSpec& layers);

// theta - beta * meta_gradient. Throws InputError on an empty task list.
ParamSet meta_update(const ParamSet& params, std::span<const Task> tasks, const MetaConfig& cfg,
                     const LayerSpec& layers);

// Mean over tasks of the query loss after K inner steps on the support set.
double mean_meta_loss(const ParamSet& params, std::span<const Task> tasks, const MetaConfig& cfg,
                      const LayerSpec& layers);

struct MetaTrainResult {
  DetectorModel model;
  std::vector<double> metaLossCurve;  // per iteration, mean over the sampled batch
  double initialMetaLoss = 0.0;       // over all training tasks
  double finalMetaLoss = 0.0;
  std::vector<std::vector<std::size_t>> batches;  // task indices per iteration
};

MetaTrainResult meta_train(const DetectorModel& init, const std::vector<Task>& tasks,
                           const MetaConfig& cfg, std::uint64_t seed);

struct Detection {
  double score = 0.0;
  int flag = 0;
};

// flag = 1 iff score >= threshold.
Detection detect(const DetectorModel& model, const std::vector<double>& x);
std::vector<Detection> detect_batch(const DetectorModel& model, const std::vector<std::vector<double>>& xs);

// Smallest k <= maxSteps with support loss <= bound after k inner steps, or
// maxSteps if the bound is never reached.
std::size_t adaptation_steps(const ParamSet& params, const LayerSpec& layers, const Dataset& support,
                             double alpha, std::size_t maxSteps, double bound);

// Adapts on support with cfg.innerSteps steps and scores the query set.
EvalReport evaluate(const DetectorModel& model, const Task& task, const MetaConfig& cfg);

// Versioned text checkpoint; values are written as hex floats so
// load_checkpoint(save_checkpoint(m)) == m exactly.
void save_checkpoint(std::ostream& out, const DetectorModel& model);
DetectorModel load_checkpoint(std::istream& in);

// Shared by every model file format in the library.
void write_params(std::ostream& out, const ParamSet& params);
ParamSet read_params(std::istream& in);

}  // namespace selfheal
