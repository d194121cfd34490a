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

#include "selfheal/detector.hpp"

#include <cmath>

#include "selfheal/error.hpp"
#include "selfheal/parallel.hpp"
#include "selfheal/rng.hpp"

namespace selfheal {

std::string to_string(MetaMode m) {
  return m == MetaMode::first_order ? "first_order" : "exact_fd_oracle";
}

MetaMode parse_meta_mode(const std::string& s) {
  if (s == "first_order") return MetaMode::first_order;
  if (s == "exact_fd_oracle") return MetaMode::exact_fd_oracle;
  throw ConfigError("unknown metaMode '" + s + "'");
}

void validate(const MetaConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw ConfigError("MetaConfig: alpha must be > 0");
  if (!(cfg.beta > 0.0)) throw ConfigError("MetaConfig: beta must be > 0");
  if (cfg.innerSteps < 1) throw ConfigError("MetaConfig: innerSteps must be >= 1");
  if (cfg.metaBatch < 1) throw ConfigError("MetaConfig: metaBatch must be >= 1");
  if (!(cfg.convergenceLoss > 0.0)) throw ConfigError("MetaConfig: convergenceLoss must be > 0");
  if (!(cfg.fdStep > 0.0)) throw ConfigError("MetaConfig: fdStep must be > 0");
}

LayerSpec detector_layers(const std::vector<std::size_t>& hidden) {
  LayerSpec spec;
  for (std::size_t w : hidden) spec.push_back({w, Activation::relu});
  spec.push_back({1, Activation::sigmoid});
  return spec;
}

DetectorModel make_detector(std::size_t inputWidth, std::uint64_t seed,
                            const std::vector<std::size_t>& hidden, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("detector threshold must lie in (0,1)");
  DetectorModel m;
  m.layers = detector_layers(hidden);
  m.params = init_mlp(inputWidth, m.layers, seed);
  m.threshold = threshold;
  return m;
}

EvalReport metrics_from_confusion(const Confusion& c, std::size_t adaptationSteps) {
  EvalReport r;
  r.confusion = c;
  r.adaptationSteps = adaptationSteps;
  r.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

namespace {

Tensor batch_matrix(const Dataset& data, std::size_t width) {
  std::vector<double> v;
  v.reserve(data.size() * width);
  for (const Example& e : data) {
    if (e.features.size() != width) {
      throw InputError("feature width " + std::to_string(e.features.size()) +
                       " does not match model input width " + std::to_string(width));
    }
    v.insert(v.end(), e.features.begin(), e.features.end());
  }
  return Tensor(Shape{data.size(), width}, std::move(v));
}

std::vector<double> labels_of(const Dataset& data) {
  std::vector<double> y;
  y.reserve(data.size());
  for (const Example& e : data) y.push_back(static_cast<double>(e.label));
  return y;
}

std::size_t input_width(const VarMap& vars) {
  auto it = vars.find(weight_name(0));
  if (it == vars.end()) throw ConfigError("missing parameter " + weight_name(0));
  return it->second.value().cols();
}

}  // namespace

ParamSet loss_gradient(const ParamSet& params, const TapedLoss& loss) {
  ad::Tape tape;
  const VarMap vars = tape.watch(params);
  const ad::Var l = loss(tape, vars);
  return tape.gradient(l, params);
}

ad::Var task_loss(ad::Tape& tape, const VarMap& vars, const LayerSpec& layers, const Dataset& data) {
  if (data.empty()) throw InputError("task_loss: empty dataset");
  const ad::Var x = tape.constant(batch_matrix(data, input_width(vars)));
  const std::vector<double> y = labels_of(data);
  if (!layers.empty() && layers.back().activation == Activation::sigmoid) {
    return ad::bce_logits(forward_mlp_logits(vars, x, layers), y);
  }
  return ad::bce(forward_mlp(vars, x, layers), y);
}

double task_loss(const ParamSet& params, const LayerSpec& layers, const Dataset& data) {
  if (data.empty()) throw InputError("task_loss: empty dataset");
  const Tensor p = forward_mlp(params, batch_matrix(data, mlp_input_width(params)), layers);
  const std::vector<double> y = labels_of(data);
  return bce_loss(p.values(), y);
}

TapedLoss dataset_loss(const LayerSpec& layers, const Dataset& data) {
  return [&layers, &data](ad::Tape& tape, const VarMap& vars) {
    return task_loss(tape, vars, layers, data);
  };
}

ParamSet inner_adapt(const ParamSet& params, const TapedLoss& loss, double alpha, std::size_t K) {
  ParamSet theta = params;
  if (alpha == 0.0) return theta;
  for (std::size_t k = 0; k < K; ++k) theta = sgd_step(theta, loss_gradient(theta, loss), alpha);
  return theta;
}

ParamSet inner_adapt(const ParamSet& params, const LayerSpec& layers, const Dataset& support,
                     double alpha, std::size_t K) {
  return inner_adapt(params, dataset_loss(layers, support), alpha, K);
}

namespace {

ParamSet task_meta_gradient(const ParamSet& params, const Task& task, const MetaConfig& cfg,
                            const LayerSpec& layers) {
  if (cfg.metaMode == MetaMode::first_order) {
    const ParamSet adapted = inner_adapt(params, layers, task.support, cfg.alpha, cfg.innerSteps);
    return loss_gradient(adapted, dataset_loss(layers, task.query));
  }
  auto composed = [&](const ParamSet& theta) {
    return task_loss(inner_adapt(theta, layers, task.support, cfg.alpha, cfg.innerSteps), layers,
                     task.query);
  };
  return finite_diff_grad(composed, params, cfg.fdStep);
}

}  // namespace

ParamSet meta_gradient(const ParamSet& params, std::span<const Task> tasks, const MetaConfig& cfg,
                       const LayerSpec& layers) {
  if (tasks.empty()) throw InputError("meta_update: empty task list");
  const auto per_task = parallel_map(tasks.size(), cfg.threads, [&](std::size_t i) {
    return task_meta_gradient(params, tasks[i], cfg, layers);
  });
  ParamSet total = per_task[0];
  for (std::size_t i = 1; i < per_task.size(); ++i) total = axpy(total, per_task[i], 1.0);
  return total;
}

ParamSet meta_update(const ParamSet& params, std::span<const Task> tasks, const MetaConfig& cfg,
                     const LayerSpec& layers) {
  if (tasks.empty()) throw InputError("meta_update: empty task list");
  if (cfg.beta == 0.0) return params;
  return sgd_step(params, meta_gradient(params, tasks, cfg, layers), cfg.beta);
}

double mean_meta_loss(const ParamSet& params, std::span<const Task> tasks, const MetaConfig& cfg,
                      const LayerSpec& layers) {
  if (tasks.empty()) throw InputError("mean_meta_loss: empty task list");
  const auto losses = parallel_map(tasks.size(), cfg.threads, [&](std::size_t i) {
    const ParamSet adapted = inner_adapt(params, layers, tasks[i].support, cfg.alpha, cfg.innerSteps);
    return task_loss(adapted, layers, tasks[i].query);
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

MetaTrainResult meta_train(const DetectorModel& init, const std::vector<Task>& tasks,
                           const MetaConfig& cfg, std::uint64_t seed) {
  MetaTrainResult result;
  result.model = init;
  if (cfg.metaIterations == 0) return result;
  validate(cfg);
  if (tasks.size() < cfg.metaBatch) {
    throw InputError("meta_train: " + std::to_string(tasks.size()) + " tasks for a meta-batch of " +
                     std::to_string(cfg.metaBatch));
  }
  Rng rng(seed);
  ParamSet theta = init.params;
  std::vector<std::size_t> order(tasks.size());
  std::size_t iter = 0;
  try {
    result.initialMetaLoss = mean_meta_loss(theta, tasks, cfg, init.layers);
    for (; iter < cfg.metaIterations; ++iter) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::vector<Task> batch;
      std::vector<std::size_t> picked;
      for (std::size_t b = 0; b < cfg.metaBatch; ++b) {
        const std::size_t j = b + rng.below(order.size() - b);
        std::swap(order[b], order[j]);
        picked.push_back(order[b]);
        batch.push_back(tasks[order[b]]);
      }
      result.metaLossCurve.push_back(mean_meta_loss(theta, batch, cfg, init.layers));
      if (!std::isfinite(result.metaLossCurve.back())) throw NonFiniteError("meta-loss is not finite");
      theta = meta_update(theta, batch, cfg, init.layers);
      result.batches.push_back(std::move(picked));
    }
    result.finalMetaLoss = mean_meta_loss(theta, tasks, cfg, init.layers);
  } catch (const NonFiniteError& e) {
    throw TrainingError(iter, std::string("meta-training diverged: ") + e.what());
  }
  result.model.params = std::move(theta);
  return result;
}

Detection detect(const DetectorModel& model, const std::vector<double>& x) {
  const std::size_t width = mlp_input_width(model.params);
  if (x.size() != width) {
    throw InputError("detect: feature width " + std::to_string(x.size()) + " vs model width " +
                     std::to_string(width));
  }
  const Tensor out = forward_mlp(model.params, Tensor::vector(x), model.layers);
  const double score = out.item();
  return {score, score >= model.threshold ? 1 : 0};
}

std::vector<Detection> detect_batch(const DetectorModel& model,
                                    const std::vector<std::vector<double>>& xs) {
  std::vector<Detection> out;
  if (xs.empty()) return out;
  const std::size_t width = mlp_input_width(model.params);
  std::vector<double> flat;
  flat.reserve(xs.size() * width);
  for (const auto& x : xs) {
    if (x.size() != width) throw InputError("detect: feature width mismatch");
    flat.insert(flat.end(), x.begin(), x.end());
  }
  const Tensor p = forward_mlp(model.params, Tensor(Shape{xs.size(), width}, std::move(flat)), model.layers);
  for (double s : p.values()) out.push_back({s, s >= model.threshold ? 1 : 0});
  return out;
}

std::size_t adaptation_steps(const ParamSet& params, const LayerSpec& layers, const Dataset& support,
                             double alpha, std::size_t maxSteps, double bound) {
  ParamSet theta = params;
  const TapedLoss loss = dataset_loss(layers, support);
  for (std::size_t k = 0; k <= maxSteps; ++k) {
    if (task_loss(theta, layers, support) <= bound) return k;
    if (k == maxSteps) break;
    theta = sgd_step(theta, loss_gradient(theta, loss), alpha);
  }
  return maxSteps;
}

EvalReport evaluate(const DetectorModel& model, const Task& task, const MetaConfig& cfg) {
  const std::size_t steps = adaptation_steps(model.params, model.layers, task.support, cfg.alpha,
                                             cfg.maxAdaptSteps, cfg.convergenceLoss);
  DetectorModel adapted = model;
  adapted.params = inner_adapt(model.params, model.layers, task.support, cfg.alpha, cfg.innerSteps);
  std::vector<std::vector<double>> xs;
  for (const Example& e : task.query) xs.push_back(e.features);
  const auto detections = detect_batch(adapted, xs);
  Confusion c;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const int y = task.query[i].label;
    const int f = detections[i].flag;
    if (f && y) ++c.tp;
    else if (f && !y) ++c.fp;
    else if (!f && y) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_confusion(c, steps);
}

}  // namespace selfheal
