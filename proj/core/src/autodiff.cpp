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

#include "selfheal/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "selfheal/error.hpp"
#include "selfheal/mlp.hpp"

namespace selfheal::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Adjoints::Adjoints(const Tape& tape) : tape_(tape), buffers_(tape.size()) {}

std::vector<double>& Adjoints::adjoint(std::size_t id) {
  auto& b = buffers_[id];
  if (b.empty()) b.assign(tape_.value(id).size(), 0.0);
  return b;
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  bool rg = false;
  for (std::size_t p : parents) rg = rg || nodes_[p].requires_grad;
  nodes_.push_back(Node{std::move(value), std::move(parents),
                        rg ? std::move(backward) : BackwardFn{}, rg});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(const std::string& name, Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  watched_[name] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

std::map<std::string, Var> Tape::watch(const ParamSet& params) {
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, variable(name, t));
  return vars;
}

ParamSet Tape::gradient(Var loss, const ParamSet& params) const {
  if (loss.tape_ != this) throw ConfigError("gradient: loss was recorded on another tape");
  if (value(loss.id()).size() != 1) {
    throw ConfigError("gradient: loss must be a single element, got shape " +
                      shape_string(value(loss.id()).shape()));
  }
  Adjoints adj(*this);
  adj.adjoint(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || !adj.has(i)) continue;
    node.backward(adj.get(i), adj);
  }
  ParamSet out;
  for (const auto& [name, t] : params) {
    auto it = watched_.find(name);
    if (it == watched_.end() || it->second > loss.id() || !adj.has(it->second) ||
        nodes_[it->second].value.shape() != t.shape()) {
      out.emplace(name, Tensor(t.shape(), 0.0));
      continue;
    }
    auto g = adj.get(it->second);
    out.emplace(name, Tensor(t.shape(), std::vector<double>(g.begin(), g.end())));
  }
  return out;
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ConfigError(std::string(op) + ": operands on different tapes");
  return a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "add");
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] + y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor(x.shape(), std::move(v)), {ia, ib},
                  [&t, ia, ib](std::span<const double> up, Adjoints& adj) {
                    for (std::size_t p : {ia, ib}) {
                      if (!t.requires_grad(p)) continue;
                      auto& g = adj.adjoint(p);
                      for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
                    }
                  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "sub");
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] - y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor(x.shape(), std::move(v)), {ia, ib},
                  [&t, ia, ib](std::span<const double> up, Adjoints& adj) {
                    if (t.requires_grad(ia)) {
                      auto& g = adj.adjoint(ia);
                      for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
                    }
                    if (t.requires_grad(ib)) {
                      auto& g = adj.adjoint(ib);
                      for (std::size_t i = 0; i < up.size(); ++i) g[i] -= up[i];
                    }
                  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "mul");
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor(x.shape(), std::move(v)), {ia, ib},
                  [&t, ia, ib](std::span<const double> up, Adjoints& adj) {
                    const Tensor& x = t.value(ia);
                    const Tensor& y = t.value(ib);
                    if (t.requires_grad(ia)) {
                      auto& g = adj.adjoint(ia);
                      for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i] * y[i];
                    }
                    if (t.requires_grad(ib)) {
                      auto& g = adj.adjoint(ib);
                      for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i] * x[i];
                    }
                  });
}

Var scale(Var a, double c) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * x[i];
  const std::size_t ia = a.id();
  return t.record(Tensor(x.shape(), std::move(v)), {ia},
                  [ia, c](std::span<const double> up, Adjoints& adj) {
                    auto& g = adj.adjoint(ia);
                    for (std::size_t i = 0; i < up.size(); ++i) g[i] += c * up[i];
                  });
}

Var square(Var a) { return mul(a, a); }

Var sum(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(s), {ia}, [ia](std::span<const double> up, Adjoints& adj) {
    auto& g = adj.adjoint(ia);
    for (double& gi : g) gi += up[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows()) {
    throw ConfigError("matmul: incompatible shapes " + shape_string(x.shape()) + " and " +
                      shape_string(y.shape()));
  }
  const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
  std::vector<double> v(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double xip = x.at(i, p);
      for (std::size_t j = 0; j < m; ++j) v[i * m + j] += xip * y.at(p, j);
    }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor(Shape{n, m}, std::move(v)), {ia, ib},
                  [&t, ia, ib, n, k, m](std::span<const double> up, Adjoints& adj) {
                    const Tensor& x = t.value(ia);
                    const Tensor& y = t.value(ib);
                    if (t.requires_grad(ia)) {
                      auto& g = adj.adjoint(ia);
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          double s = 0.0;
                          for (std::size_t j = 0; j < m; ++j) s += up[i * m + j] * y.at(p, j);
                          g[i * k + p] += s;
                        }
                    }
                    if (t.requires_grad(ib)) {
                      auto& g = adj.adjoint(ib);
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          const double xip = x.at(i, p);
                          for (std::size_t j = 0; j < m; ++j) g[p * m + j] += xip * up[i * m + j];
                        }
                    }
                  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& t = same_tape(x, weight, "linear");
  same_tape(x, bias, "linear");
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  if (w.rank() != 2 || in.rank() > 2 || in.cols() != w.cols() || b.rank() != 1 ||
      b.size() != w.rows()) {
    throw ConfigError("linear: input " + shape_string(in.shape()) + ", weight " +
                      shape_string(w.shape()) + ", bias " + shape_string(b.shape()) +
                      " are incompatible");
  }
  const std::size_t n = in.rows(), k = in.cols(), m = w.rows();
  const double* X = in.values().data();
  const double* W = w.values().data();
  const double* B = b.values().data();
  std::vector<double> v(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = X + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* wj = W + j * k;
      double s = B[j];
      for (std::size_t p = 0; p < k; ++p) s += xi[p] * wj[p];
      v[i * m + j] = s;
    }
  }
  Shape shape = in.rank() == 1 ? Shape{m} : Shape{n, m};
  const std::size_t ix = x.id(), iw = weight.id(), ibias = bias.id();
  return t.record(Tensor(std::move(shape), std::move(v)), {ix, iw, ibias},
                  [&t, ix, iw, ibias, n, k, m](std::span<const double> up, Adjoints& adj) {
                    const double* X = t.value(ix).values().data();
                    const double* W = t.value(iw).values().data();
                    if (t.requires_grad(ix)) {
                      double* g = adj.adjoint(ix).data();
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < m; ++j) {
                          const double u = up[i * m + j];
                          if (u == 0.0) continue;
                          const double* wj = W + j * k;
                          double* gi = g + i * k;
                          for (std::size_t p = 0; p < k; ++p) gi[p] += u * wj[p];
                        }
                    }
                    if (t.requires_grad(iw)) {
                      double* g = adj.adjoint(iw).data();
                      for (std::size_t i = 0; i < n; ++i) {
                        const double* xi = X + i * k;
                        for (std::size_t j = 0; j < m; ++j) {
                          const double u = up[i * m + j];
                          if (u == 0.0) continue;
                          double* gj = g + j * k;
                          for (std::size_t p = 0; p < k; ++p) gj[p] += u * xi[p];
                        }
                      }
                    }
                    if (t.requires_grad(ibias)) {
                      double* g = adj.adjoint(ibias).data();
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < m; ++j) g[j] += up[i * m + j];
                    }
                  });
}

Var relu(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] > 0.0 ? x[i] : 0.0;
  const std::size_t ia = a.id();
  return t.record(Tensor(x.shape(), std::move(v)), {ia},
                  [&t, ia](std::span<const double> up, Adjoints& adj) {
                    const Tensor& x = t.value(ia);
                    auto& g = adj.adjoint(ia);
                    for (std::size_t i = 0; i < up.size(); ++i)
                      if (x[i] > 0.0) g[i] += up[i];
                  });
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = logistic(x[i]);
  const std::size_t ia = a.id();
  const std::size_t io = t.size();  // id the output is about to receive
  return t.record(Tensor(x.shape(), std::move(v)), {ia},
                  [&t, ia, io](std::span<const double> up, Adjoints& adj) {
                    const Tensor& s = t.value(io);
                    auto& g = adj.adjoint(ia);
                    for (std::size_t i = 0; i < up.size(); ++i)
                      g[i] += up[i] * s[i] * (1.0 - s[i]);
                  });
}

Var bce(Var pred, std::span<const double> labels) {
  Tape& t = pred.tape();
  const Tensor& p = pred.value();
  if (p.size() != labels.size()) {
    throw ConfigError("bce: " + std::to_string(p.size()) + " predictions vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw InputError("bce: empty batch");
  std::vector<double> y(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw InputError("bce: label must be 0 or 1");
    total += bce_loss(p[i], y[i]);
  }
  const double n = static_cast<double>(y.size());
  const std::size_t ip = pred.id();
  return t.record(Tensor::scalar(total / n), {ip},
                  [&t, ip, y = std::move(y), n](std::span<const double> up, Adjoints& adj) {
                    const Tensor& p = t.value(ip);
                    auto& g = adj.adjoint(ip);
                    for (std::size_t i = 0; i < y.size(); ++i) {
                      const double pi = p[i];
                      if (pi < kBceEpsilon || pi > 1.0 - kBceEpsilon) continue;  // clamped
                      g[i] += up[0] * (pi - y[i]) / (pi * (1.0 - pi)) / n;
                    }
                  });
}

Var bce_logits(Var logits, std::span<const double> labels) {
  Tape& t = logits.tape();
  const Tensor& z = logits.value();
  if (z.size() != labels.size()) {
    throw ConfigError("bce_logits: " + std::to_string(z.size()) + " logits vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw InputError("bce_logits: empty batch");
  std::vector<double> y(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw InputError("bce_logits: label must be 0 or 1");
    total += bce_loss(logistic(z[i]), y[i]);
  }
  const double n = static_cast<double>(y.size());
  const std::size_t iz = logits.id();
  return t.record(Tensor::scalar(total / n), {iz},
                  [&t, iz, y = std::move(y), n](std::span<const double> up, Adjoints& adj) {
                    const Tensor& z = t.value(iz);
                    auto& g = adj.adjoint(iz);
                    for (std::size_t i = 0; i < y.size(); ++i) {
                      g[i] += up[0] * (logistic(z[i]) - y[i]) / n;
                    }
                  });
}

Var neighbor_sum(Var h, std::shared_ptr<const NeighborLists> neighbors) {
  Tape& t = h.tape();
  const Tensor& x = h.value();
  if (x.rank() != 2 || neighbors->size() != x.rows()) {
    throw ConfigError("neighbor_sum: " + std::to_string(neighbors->size()) +
                      " neighbor lists for embeddings " + shape_string(x.shape()));
  }
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> v(n * d, 0.0);
  const double* X = x.values().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : (*neighbors)[i]) {
      if (j >= n) throw ConfigError("neighbor_sum: neighbor index out of range");
      const double* xj = X + j * d;
      double* vi = v.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) vi[c] += xj[c];
    }
  const std::size_t ih = h.id();
  return t.record(Tensor(x.shape(), std::move(v)), {ih},
                  [ih, neighbors, n, d](std::span<const double> up, Adjoints& adj) {
                    double* g = adj.adjoint(ih).data();
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j : (*neighbors)[i]) {
                        double* gj = g + j * d;
                        const double* ui = up.data() + i * d;
                        for (std::size_t c = 0; c < d; ++c) gj[c] += ui[c];
                      }
                  });
}

}  // namespace selfheal::ad
