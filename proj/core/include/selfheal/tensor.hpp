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
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace selfheal {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of finite doubles. Construction validates that the
// extent product matches the value count and rejects NaN/Inf, so every
// Tensor that exists is well formed.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Matrix view helpers; a rank-1 tensor of length n is treated as 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  // Single-element read; throws unless size() == 1.
  double item() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

// Model parameters keyed by name. std::map gives the lexicographic,
// deterministic iteration order every reduction relies on.
using ParamSet = std::map<std::string, Tensor>;

bool update_compatible(const ParamSet& a, const ParamSet& b);

// Zeros with the same names and shapes.
ParamSet zeros_like(const ParamSet& params);
std::size_t parameter_count(const ParamSet& params);

// out[k] = params[k] - lr * grads[k]. Throws ConfigError listing every
// mismatched name when the two sets are not update-compatible.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr);

// Elementwise a + scale * b over update-compatible sets.
ParamSet axpy(const ParamSet& a, const ParamSet& b, double scale);

// Flatten to one vector in iteration order, and back.
std::vector<double> flatten(const ParamSet& params);
ParamSet unflatten(const ParamSet& like, std::span<const double> flat);

using LossFn = std::function<double(const ParamSet&)>;

// Central differences (L(theta + h e_i) - L(theta - h e_i)) / 2h for every
// coordinate. The verification oracle for reverse mode.
ParamSet finite_diff_grad(const LossFn& loss, const ParamSet& params, double step);

}  // namespace selfheal
