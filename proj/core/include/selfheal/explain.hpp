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
#include <string>
#include <vector>

#include "selfheal/detector.hpp"
#include "selfheal/recovery.hpp"

namespace selfheal {

inline constexpr std::size_t kMaxShapleyGroups = 12;

// A partition of feature indices into named groups.
struct FeatureGroups {
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::string> names;
  std::size_t size() const { return members.size(); }
};

// Throws InputError unless the groups cover 0..width-1 exactly once.
void validate_partition(const FeatureGroups& g, std::size_t width);

// One group per telemetry metric across a window of w ticks laid out by
// window_features: group m holds features {m, m+5, m+10, ...}.
FeatureGroups metric_groups(std::size_t windowW);

struct Attribution {
  std::vector<double> phi;  // one per group
  std::vector<std::string> groupNames;
  double baseValue = 0.0;      // mean output over the background
  double instanceValue = 0.0;  // output at x
};

// Batch model: rows in, one scalar output per row.
using BatchModel = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

// Exact Shapley values by enumerating all 2^g coalitions. v(S) replaces the
// groups outside S with each background row's values and averages the model
// output over the background. CapacityError when g > 12.
Attribution shapley_attribution(const BatchModel& model, const std::vector<double>& x,
                                const std::vector<std::vector<double>>& background,
                                const FeatureGroups& groups);
Attribution shapley_attribution(const DetectorModel& model, const std::vector<double>& x,
                                const std::vector<std::vector<double>>& background,
                                const FeatureGroups& groups);

// Index of the largest phi; ties go to the lowest index.
std::size_t top_group(const Attribution& a);

struct RankedAction {
  ActionKind action = ActionKind::no_op;
  double q = 0.0;
  double gap = 0.0;  // Q(best) - Q(action)
};

// All actions by descending Q; equal values keep ordinal order.
std::vector<RankedAction> explain_recovery(const Policy& policy, const SystemState& state);

}  // namespace selfheal
