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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "selfheal/tensor.hpp"

namespace selfheal::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while its
// tape is alive.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Adjoint storage handed to backward closures; adjoint(i) is lazily sized.
class Adjoints {
 public:
  explicit Adjoints(const Tape& tape);
  std::vector<double>& adjoint(std::size_t id);
  bool has(std::size_t id) const { return !buffers_[id].empty(); }
  std::span<const double> get(std::size_t id) const { return buffers_[id]; }

 private:
  const Tape& tape_;
  std::vector<std::vector<double>> buffers_;
};

// Accumulates d(out)/d(parents) given the node's own adjoint.
using BackwardFn = std::function<void(std::span<const double> upstream, Adjoints& adj)>;

// Linear record of operations for first-order reverse mode. A tape belongs to
// one logical computation; it is not meant to be shared between threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // A named leaf whose gradient gradient() reports.
  Var variable(const std::string& name, Tensor value);
  std::map<std::string, Var> watch(const ParamSet& params);

  // d(loss)/d(param) for each entry of params, shaped like params. Entries
  // that were never watched on this tape get zeros. loss must be a single
  // element. Calling this repeatedly returns identical results.
  ParamSet gradient(Var loss, const ParamSet& params) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Used by op implementations.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> watched_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);

// a[n,k] * b[k,m].
Var matmul(Var a, Var b);
// x W^T + bias with x [n,in] (or [in]), W [out,in], bias [out]; a rank-1 x
// yields a rank-1 result.
Var linear(Var x, Var weight, Var bias);

Var relu(Var a);
Var sigmoid(Var a);

// Mean binary cross-entropy of probabilities against {0,1} labels, with the
// prediction clamped to [kBceEpsilon, 1 - kBceEpsilon] before the log.
Var bce(Var pred, std::span<const double> labels);

// bce(sigmoid(logits), labels) fused. The value is the same clamped loss; the
// backward pass uses (sigmoid(z) - y) / n everywhere, so a saturated wrong
// prediction still receives a gradient instead of the clamp's zero.
Var bce_logits(Var logits, std::span<const double> labels);

using NeighborLists = std::vector<std::vector<std::size_t>>;
// out[i] = sum over j in neighbors[i] of h[j]; h is [n,d].
Var neighbor_sum(Var h, std::shared_ptr<const NeighborLists> neighbors);

}  // namespace selfheal::ad
