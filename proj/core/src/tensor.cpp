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

#include "selfheal/tensor.hpp"

#include <cmath>
#include <sstream>

#include "selfheal/error.hpp"

namespace selfheal {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate(const Shape& shape, const std::vector<double>& values) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one extent");
  for (std::size_t e : shape) {
    if (e == 0) throw ConfigError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ConfigError("tensor shape " + shape_string(shape) + " does not match " +
                      std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value in tensor");
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  validate(shape_, values_);
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  values_.assign(shape_size(shape_), fill);
  validate(shape_, values_);
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return shape_[0];
  throw ConfigError("matrix view requires rank 1 or 2, got " + shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw ConfigError("matrix view requires rank 1 or 2, got " + shape_string(shape_));
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ConfigError("item() on tensor of shape " + shape_string(shape_));
  }
  return values_[0];
}

bool update_compatible(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape() != ib->second.shape()) return false;
  }
  return true;
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape(), 0.0));
  return out;
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

namespace {

void require_compatible(const ParamSet& a, const ParamSet& b, const char* op) {
  if (update_compatible(a, b)) return;
  std::string names;
  auto note = [&](const std::string& n) {
    if (!names.empty()) names += ", ";
    names += n;
  };
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.shape() != t.shape()) note(name);
  }
  for (const auto& [name, t] : b) {
    if (!a.contains(name)) note(name);
  }
  throw ConfigError(std::string(op) + ": incompatible parameter sets: " + names);
}

}  // namespace

ParamSet axpy(const ParamSet& a, const ParamSet& b, double scale) {
  require_compatible(a, b, "axpy");
  ParamSet out;
  auto ib = b.begin();
  for (const auto& [name, ta] : a) {
    const auto& tb = (ib++)->second;
    std::vector<double> v(ta.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = ta[i] + scale * tb[i];
    out.emplace(name, Tensor(ta.shape(), std::move(v)));
  }
  return out;
}

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr) {
  if (!(lr >= 0.0)) throw ConfigError("sgd_step: learning rate must be >= 0");
  require_compatible(params, grads, "sgd_step");
  return axpy(params, grads, -lr);
}

std::vector<double> flatten(const ParamSet& params) {
  std::vector<double> flat;
  flat.reserve(parameter_count(params));
  for (const auto& [name, t] : params) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

ParamSet unflatten(const ParamSet& like, std::span<const double> flat) {
  if (flat.size() != parameter_count(like)) {
    throw ConfigError("unflatten: expected " + std::to_string(parameter_count(like)) +
                      " values, got " + std::to_string(flat.size()));
  }
  ParamSet out;
  std::size_t off = 0;
  for (const auto& [name, t] : like) {
    std::vector<double> v(flat.begin() + off, flat.begin() + off + t.size());
    off += t.size();
    out.emplace(name, Tensor(t.shape(), std::move(v)));
  }
  return out;
}

ParamSet finite_diff_grad(const LossFn& loss, const ParamSet& params, double step) {
  if (!(step > 0.0)) throw ConfigError("finite_diff_grad: step must be > 0");
  std::vector<double> flat = flatten(params);
  std::vector<double> g(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + step;
    const double up = loss(unflatten(params, flat));
    flat[i] = orig - step;
    const double down = loss(unflatten(params, flat));
    flat[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return unflatten(params, g);
}

}  // namespace selfheal
