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

#include "selfheal/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "selfheal/error.hpp"
#include "selfheal/rng.hpp"

namespace selfheal {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "linear";
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string weight_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }

double logistic(double z) {
  // Kept strictly inside (0, 1): for |z| beyond ~37 the plain formula rounds
  // to exactly 1 (or underflows to 0).
  constexpr double kTop = 1.0 - 0x1p-53;
  constexpr double kBottom = std::numeric_limits<double>::denorm_min();
  if (z >= 0.0) return std::min(kTop, 1.0 / (1.0 + std::exp(-z)));
  const double e = std::exp(z);
  return std::max(kBottom, e / (1.0 + e));
}

double bce_loss(double pred, double label) {
  if (label != 0.0 && label != 1.0) throw InputError("bce_loss: label must be 0 or 1");
  const double p = std::clamp(pred, kBceEpsilon, 1.0 - kBceEpsilon);
  return label == 1.0 ? -std::log(p) : -std::log(1.0 - p);
}

double bce_loss(std::span<const double> preds, std::span<const double> labels) {
  if (preds.size() != labels.size()) throw InputError("bce_loss: size mismatch");
  if (preds.empty()) throw InputError("bce_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += bce_loss(preds[i], labels[i]);
  return total / static_cast<double>(preds.size());
}

ParamSet init_mlp(std::size_t input_width, const LayerSpec& spec, std::uint64_t seed) {
  if (input_width == 0) throw ConfigError("init_mlp: input width must be positive");
  Rng rng(seed);
  ParamSet params;
  std::size_t fan_in = input_width;
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const std::size_t out = spec[l].width;
    if (out == 0) throw ConfigError("init_mlp: layer " + std::to_string(l) + " has zero width");
    const double r = 0.5 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(out * fan_in), b(out);
    for (double& v : w) v = rng.uniform(-r, r);
    for (double& v : b) v = rng.uniform(-r, r);
    params.emplace(weight_name(l), Tensor(Shape{out, fan_in}, std::move(w)));
    params.emplace(bias_name(l), Tensor(Shape{out}, std::move(b)));
    fan_in = out;
  }
  return params;
}

namespace {

const Tensor& lookup(const ParamSet& params, const std::string& name, std::size_t layer) {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ConfigError("layer " + std::to_string(layer) + ": missing parameter " + name);
  }
  return it->second;
}

void check_layer(const Tensor& w, const Tensor& b, std::size_t fan_in, const Layer& layer,
                 std::size_t l) {
  if (w.rank() != 2 || w.rows() != layer.width || w.cols() != fan_in || b.rank() != 1 ||
      b.size() != layer.width) {
    throw ConfigError("layer " + std::to_string(l) + ": expected weight [" +
                      std::to_string(layer.width) + "x" + std::to_string(fan_in) + "] and bias [" +
                      std::to_string(layer.width) + "], got " + shape_string(w.shape()) +
                      " and " + shape_string(b.shape()));
  }
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return logistic(z);
    case Activation::linear: break;
  }
  return z;
}

}  // namespace

std::size_t mlp_input_width(const ParamSet& params) {
  return lookup(params, weight_name(0), 0).cols();
}

Tensor forward_mlp(const ParamSet& params, const Tensor& input, const LayerSpec& spec) {
  if (spec.empty()) throw ConfigError("forward_mlp: empty layer spec");
  if (input.rank() > 2) throw ConfigError("forward_mlp: input must be [d] or [n, d]");
  const std::size_t n = input.rows();
  std::vector<double> act(input.values().begin(), input.values().end());
  std::size_t width = input.cols();
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const Tensor& w = lookup(params, weight_name(l), l);
    const Tensor& b = lookup(params, bias_name(l), l);
    check_layer(w, b, width, spec[l], l);
    const std::size_t m = spec[l].width;
    std::vector<double> next(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double s = b[j];
        for (std::size_t p = 0; p < width; ++p) s += act[i * width + p] * w.at(j, p);
        next[i * m + j] = activate(spec[l].activation, s);
      }
    act = std::move(next);
    width = m;
  }
  Shape shape = input.rank() == 1 ? Shape{width} : Shape{n, width};
  return Tensor(std::move(shape), std::move(act));
}

namespace {

ad::Var taped_forward(const std::map<std::string, ad::Var>& vars, ad::Var input,
                      const LayerSpec& spec, bool final_activation) {
  if (spec.empty()) throw ConfigError("forward_mlp: empty layer spec");
  ad::Var h = input;
  std::size_t width = input.value().cols();
  for (std::size_t l = 0; l < spec.size(); ++l) {
    auto wi = vars.find(weight_name(l));
    auto bi = vars.find(bias_name(l));
    if (wi == vars.end() || bi == vars.end()) {
      throw ConfigError("layer " + std::to_string(l) + ": missing parameter " +
                        (wi == vars.end() ? weight_name(l) : bias_name(l)));
    }
    check_layer(wi->second.value(), bi->second.value(), width, spec[l], l);
    h = ad::linear(h, wi->second, bi->second);
    width = spec[l].width;
    if (l + 1 == spec.size() && !final_activation) break;
    switch (spec[l].activation) {
      case Activation::relu: h = ad::relu(h); break;
      case Activation::sigmoid: h = ad::sigmoid(h); break;
      case Activation::linear: break;
    }
  }
  return h;
}

}  // namespace

ad::Var forward_mlp(const std::map<std::string, ad::Var>& vars, ad::Var input,
                    const LayerSpec& spec) {
  return taped_forward(vars, input, spec, true);
}

ad::Var forward_mlp_logits(const std::map<std::string, ad::Var>& vars, ad::Var input,
                           const LayerSpec& spec) {
  return taped_forward(vars, input, spec, false);
}

}  // namespace selfheal
