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

#include "selfheal/explain.hpp"

#include <algorithm>
#include <bit>

#include "selfheal/error.hpp"
#include "selfheal/mlp.hpp"

namespace selfheal {

void validate_partition(const FeatureGroups& g, std::size_t width) {
  if (!g.names.empty() && g.names.size() != g.members.size()) {
    throw InputError("feature groups: " + std::to_string(g.names.size()) + " names for " +
                     std::to_string(g.members.size()) + " groups");
  }
  std::vector<int> seen(width, 0);
  for (std::size_t j = 0; j < g.members.size(); ++j) {
    if (g.members[j].empty()) throw InputError("feature group " + std::to_string(j) + " is empty");
    for (std::size_t f : g.members[j]) {
      if (f >= width) {
        throw InputError("feature group " + std::to_string(j) + " references feature " +
                         std::to_string(f) + " of " + std::to_string(width));
      }
      if (seen[f]++) throw InputError("feature " + std::to_string(f) + " is in two groups");
    }
  }
  for (std::size_t f = 0; f < width; ++f) {
    if (!seen[f]) throw InputError("feature " + std::to_string(f) + " is in no group");
  }
}

FeatureGroups metric_groups(std::size_t windowW) {
  if (windowW == 0) throw InputError("metric_groups: window width must be >= 1");
  FeatureGroups g;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < windowW; ++k) ids.push_back(k * kMetricCount + m);
    g.members.push_back(std::move(ids));
    g.names.push_back(metric_column(static_cast<Metric>(m)));
  }
  return g;
}

Attribution shapley_attribution(const BatchModel& model, const std::vector<double>& x,
                                const std::vector<std::vector<double>>& background,
                                const FeatureGroups& groups) {
  const std::size_t g = groups.size();
  if (g > kMaxShapleyGroups) {
    throw CapacityError("shapley_attribution: " + std::to_string(g) +
                        " groups exceed the exact-enumeration limit of " +
                        std::to_string(kMaxShapleyGroups) + "; coarsen the grouping");
  }
  if (g == 0) throw InputError("shapley_attribution: no feature groups");
  if (background.empty()) throw InputError("shapley_attribution: empty background set");
  for (const auto& row : background) {
    if (row.size() != x.size()) throw InputError("shapley_attribution: background width mismatch");
  }
  validate_partition(groups, x.size());

  const std::size_t masks = std::size_t{1} << g;
  const std::size_t nb = background.size();
  std::vector<std::vector<double>> rows;
  rows.reserve(masks * nb);
  for (std::size_t s = 0; s < masks; ++s) {
    for (const auto& b : background) {
      std::vector<double> z = b;
      for (std::size_t j = 0; j < g; ++j)
        if (s >> j & 1U)
          for (std::size_t f : groups.members[j]) z[f] = x[f];
      rows.push_back(std::move(z));
    }
  }
  const std::vector<double> out = model(rows);
  if (out.size() != rows.size()) throw InputError("shapley_attribution: model output size mismatch");
  std::vector<double> v(masks, 0.0);
  for (std::size_t s = 0; s < masks; ++s) {
    double acc = 0.0;
    for (std::size_t r = 0; r < nb; ++r) acc += out[s * nb + r];
    v[s] = acc / static_cast<double>(nb);
  }

  // k! (g-k-1)! / g! == 1 / (g * C(g-1, k))
  std::vector<double> weight(g, 0.0);
  for (std::size_t k = 0; k < g; ++k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
      c *= static_cast<double>(g - 1 - k + i) / static_cast<double>(i);
    }
    weight[k] = 1.0 / (static_cast<double>(g) * c);
  }

  Attribution a;
  a.phi.assign(g, 0.0);
  for (std::size_t j = 0; j < g; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t s = 0; s < masks; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    a.phi[j] = phi;
  }
  a.groupNames = groups.names;
  if (a.groupNames.empty()) {
    for (std::size_t j = 0; j < g; ++j) a.groupNames.push_back("group" + std::to_string(j));
  }
  a.baseValue = v[0];
  a.instanceValue = v[masks - 1];
  return a;
}

Attribution shapley_attribution(const DetectorModel& model, const std::vector<double>& x,
                                const std::vector<std::vector<double>>& background,
                                const FeatureGroups& groups) {
  const std::size_t width = mlp_input_width(model.params);
  if (x.size() != width) {
    throw InputError("shapley_attribution: instance width " + std::to_string(x.size()) +
                     " vs model width " + std::to_string(width));
  }
  BatchModel f = [&model, width](const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * width);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    const Tensor out =
        forward_mlp(model.params, Tensor::matrix(rows.size(), width, std::move(flat)), model.layers);
    return std::vector<double>(out.values().begin(), out.values().end());
  };
  return shapley_attribution(f, x, background, groups);
}

std::size_t top_group(const Attribution& a) {
  if (a.phi.empty()) throw InputError("top_group: empty attribution");
  std::size_t best = 0;
  for (std::size_t j = 1; j < a.phi.size(); ++j)
    if (a.phi[j] > a.phi[best]) best = j;
  return best;
}

std::vector<RankedAction> explain_recovery(const Policy& policy, const SystemState& state) {
  std::vector<RankedAction> out;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    const ActionKind a = action_from_ordinal(i);
    out.push_back({a, policy.value(state, a), 0.0});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedAction& l, const RankedAction& r) { return l.q > r.q; });
  for (auto& r : out) r.gap = out.front().q - r.q;
  return out;
}

}  // namespace selfheal
