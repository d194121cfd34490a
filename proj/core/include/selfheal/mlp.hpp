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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "selfheal/autodiff.hpp"
#include "selfheal/tensor.hpp"

namespace selfheal {

inline constexpr double kBceEpsilon = 1e-7;

enum class Activation { linear, relu, sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct Layer {
  std::size_t width = 0;
  Activation activation = Activation::linear;
  bool operator==(const Layer&) const = default;
};

using LayerSpec = std::vector<Layer>;

// Parameter names for layer i: "layer<i>.weight" [width, fan_in] and
// "layer<i>.bias" [width].
std::string weight_name(std::size_t layer);
std::string bias_name(std::size_t layer);

// Numerically stable 1 / (1 + exp(-z)).
double logistic(double z);

// -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps]. Label must be 0 or 1.
double bce_loss(double pred, double label);
// Mean over the batch.
double bce_loss(std::span<const double> preds, std::span<const double> labels);

// Weights drawn uniformly from [-0.5/sqrt(fan_in), +0.5/sqrt(fan_in)], biases
// from the same range.
ParamSet init_mlp(std::size_t input_width, const LayerSpec& spec, std::uint64_t seed);

// Evaluates the network on a single input [d] or a batch [n, d]. Throws
// ConfigError naming the offending layer on any shape mismatch.
Tensor forward_mlp(const ParamSet& params, const Tensor& input, const LayerSpec& spec);

// Same composition recorded on a tape; vars maps parameter names to tape
// variables (or constants).
ad::Var forward_mlp(const std::map<std::string, ad::Var>& vars, ad::Var input,
                    const LayerSpec& spec);

// Taped forward pass that stops before the final layer's activation.
ad::Var forward_mlp_logits(const std::map<std::string, ad::Var>& vars, ad::Var input,
                           const LayerSpec& spec);

// Input width the parameters expect, read from layer0.weight.
std::size_t mlp_input_width(const ParamSet& params);

}  // namespace selfheal
