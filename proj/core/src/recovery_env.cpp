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

#include <algorithm>
#include <cmath>

#include "selfheal/error.hpp"
#include "selfheal/recovery.hpp"

namespace selfheal {

namespace {

constexpr std::size_t kLoadProbeTicks = 960;
constexpr int kMinCapacity = 1;
constexpr int kMaxCapacity = 3;

WorkloadPattern clean_pattern(WorkloadPattern p) {
  p.anomalyRate = 0.0;
  return p;
}

AnomalyStatus status_of(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::cpu_spike: return AnomalyStatus::cpu;
    case AnomalyKind::memory_leak: return AnomalyStatus::memory;
    case AnomalyKind::lock_contention: return AnomalyStatus::lock;
    case AnomalyKind::io_saturation: return AnomalyStatus::io;
    case AnomalyKind::cascade_seed: return AnomalyStatus::cascade;
  }
  return AnomalyStatus::none;
}

bool remedies(ActionKind a, AnomalyKind k) {
  switch (k) {
    case AnomalyKind::cpu_spike: return a == ActionKind::scale_up;
    case AnomalyKind::memory_leak: return a == ActionKind::restart_component;
    case AnomalyKind::lock_contention: return a == ActionKind::throttle_admission;
    case AnomalyKind::io_saturation: return a == ActionKind::rebuild_index;
    case AnomalyKind::cascade_seed: return a == ActionKind::restart_component;
  }
  return false;
}

}  // namespace

void validate(const EnvConfig& c) {
  if (c.horizon == 0) throw ConfigError("env.horizon must be >= 1");
  if (c.onsetMin > c.onsetMax) throw ConfigError("env onset range is empty");
  if (c.onsetMax >= c.horizon) throw ConfigError("env.onsetMax must fall inside the horizon");
  if (!(c.thresholdC > 0.0 && c.thresholdC <= 1.0)) {
    throw ConfigError("env.thresholdC must lie in (0, 1]");
  }
  if (c.historyTicks == 0) throw ConfigError("env.historyTicks must be >= 1");
  validate(c.costs);
}

DatabaseRecoveryEnv::DatabaseRecoveryEnv(WorkloadPattern pattern, ComponentGraph graph,
                                         EnvConfig cfg)
    : pattern_(std::move(pattern)), graph_(std::move(graph)), cfg_(std::move(cfg)) {
  validate(pattern_);
  validate(cfg_);
  if (graph_.size() == 0) throw ConfigError("recovery env: empty component graph");
  baseQps_ = std::max(pattern_.baseRates[static_cast<std::size_t>(Metric::qps)], 1e-9);
  const Trace probe = generate_trace(clean_pattern(pattern_),
                                     derive_seed(fnv1a64(pattern_.patternId), "load-levels"),
                                     kLoadProbeTicks);
  std::vector<double> q;
  for (const auto& w : probe) q.push_back(w.qps);
  std::sort(q.begin(), q.end());
  auto pct = [&](double p) { return q[static_cast<std::size_t>(p * static_cast<double>(q.size() - 1))]; };
  loadCuts_ = {pct(0.33), pct(0.66)};
}

std::unique_ptr<RecoveryEnvironment> DatabaseRecoveryEnv::clone() const {
  return std::make_unique<DatabaseRecoveryEnv>(*this);
}

SystemState DatabaseRecoveryEnv::reset(std::uint64_t episodeSeed) {
  const std::size_t h = cfg_.historyTicks;
  clean_ = generate_trace(clean_pattern(pattern_), derive_seed(episodeSeed, "workload"),
                          h + cfg_.horizon);
  Rng rng(derive_seed(episodeSeed, "anomaly"));
  onset_ = cfg_.onsetMin + rng.below(cfg_.onsetMax - cfg_.onsetMin + 1);
  kind_ = static_cast<AnomalyKind>(rng.below(5));
  magnitude_ = rng.uniform(2.5, 4.0);
  cascade_.reset();
  if (kind_ == AnomalyKind::cascade_seed) {
    cascade_ = sample_cascade(graph_, onset_, cfg_.horizon, cfg_.thresholdC,
                              derive_seed(episodeSeed, "cascade"));
  }
  healthyNodes_ = healthy_node_telemetry(graph_, cfg_.horizon, derive_seed(episodeSeed, "nodes"));
  t_ = 0;
  resolved_ = false;
  resolvedAt_ = 0;
  rerouted_ = false;
  capacity_ = 2;
  return true_state();
}

AnomalyStatus DatabaseRecoveryEnv::active_anomaly() const {
  if (t_ < onset_ || resolved_) return AnomalyStatus::none;
  return status_of(kind_);
}

double DatabaseRecoveryEnv::failed_fraction() const {
  if (!cascade_ || resolved_ || t_ >= cfg_.horizon) return 0.0;
  std::size_t failed = 0;
  for (const auto& f : cascade_->failureTime) failed += (f && *f <= t_) ? 1 : 0;
  return static_cast<double>(failed) / static_cast<double>(graph_.size());
}

SystemState DatabaseRecoveryEnv::true_state() const {
  const std::size_t i = cfg_.historyTicks + std::min(t_, cfg_.horizon - 1);
  const double qps = clean_.at(i).qps;
  SystemState s;
  s.load = qps <= loadCuts_.first    ? LoadLevel::low
           : qps <= loadCuts_.second ? LoadLevel::medium
                                     : LoadLevel::high;
  s.anomaly = t_ < cfg_.horizon ? active_anomaly() : AnomalyStatus::none;
  s.failed = failed_bin(failed_fraction());
  return s;
}

Trace DatabaseRecoveryEnv::recent_telemetry(std::size_t w) const {
  const std::size_t end = cfg_.historyTicks + std::min(t_, cfg_.horizon - 1);
  if (w == 0 || w > end + 1) {
    throw InputError("recent_telemetry: window of " + std::to_string(w) + " exceeds history");
  }
  const Metric m = affected_metric(kind_);
  Trace out(clean_.begin() + static_cast<std::ptrdiff_t>(end + 1 - w),
            clean_.begin() + static_cast<std::ptrdiff_t>(end + 1));
  for (auto& win : out) {
    const std::size_t tick = win.index - cfg_.historyTicks;
    const bool shown = win.index >= cfg_.historyTicks && tick >= onset_ &&
                       (!resolved_ || tick <= resolvedAt_);
    if (!shown) continue;
    win.set_metric(m, win.metric(m) * magnitude_);
    clamp_window(win);
    win.label = 1;
  }
  return out;
}

std::vector<Trace> DatabaseRecoveryEnv::node_snapshot() const {
  const std::size_t t = std::min(t_, cfg_.horizon - 1);
  const bool cascading = cascade_ && !resolved_;
  std::vector<Trace> out(graph_.size());
  for (std::size_t v = 0; v < graph_.size(); ++v) {
    out[v] = {cascading ? cascade_->nodeTelemetry[v][t] : healthyNodes_[v][t]};
    out[v][0].index = 0;
  }
  return out;
}

double DatabaseRecoveryEnv::latency_now(ActionKind action) const {
  const TelemetryWindow& w = clean_.at(cfg_.historyTicks + t_);
  const double load = w.qps / baseQps_;
  const double congestion = 1.0 + 0.5 * load * (2.0 / static_cast<double>(capacity_));
  double l = w.latencyMs * congestion;
  if (active_anomaly() != AnomalyStatus::none) {
    const double age = static_cast<double>(t_ - onset_ + 1);
    switch (kind_) {
      case AnomalyKind::cpu_spike: l += 15.0 * magnitude_; break;
      case AnomalyKind::memory_leak: l += 5.0 * magnitude_ * std::min(age, 6.0); break;
      case AnomalyKind::lock_contention: l += 20.0 * magnitude_; break;
      case AnomalyKind::io_saturation: l += 15.0 * magnitude_; break;
      case AnomalyKind::cascade_seed:
        l += 10.0 * magnitude_ + 150.0 * failed_fraction() * (rerouted_ ? 0.3 : 1.0);
        break;
    }
  }
  switch (action) {
    case ActionKind::restart_component: l += 25.0; break;
    case ActionKind::rebuild_index: l += 15.0; break;
    case ActionKind::throttle_admission: l += 5.0; break;
    case ActionKind::reroute_query: l += 2.0; break;
    default: break;
  }
  return l;
}

double DatabaseRecoveryEnv::resource_now() const {
  const TelemetryWindow& w = clean_.at(cfg_.historyTicks + t_);
  double r = 0.15 + 0.25 * static_cast<double>(capacity_) + 0.05 * w.qps / baseQps_;
  const AnomalyStatus a = active_anomaly();
  if (a == AnomalyStatus::cpu || a == AnomalyStatus::memory) r += 0.05;
  return std::clamp(r, 0.0, 1.0);
}

StepResult DatabaseRecoveryEnv::step(ActionKind action) {
  if (t_ >= cfg_.horizon) throw InputError("recovery env: step after the episode ended");
  switch (action) {
    case ActionKind::scale_up: capacity_ = std::min(kMaxCapacity, capacity_ + 1); break;
    case ActionKind::scale_down: capacity_ = std::max(kMinCapacity, capacity_ - 1); break;
    case ActionKind::reroute_query:
      if (active_anomaly() == AnomalyStatus::cascade) rerouted_ = true;
      break;
    default: break;
  }
  if (active_anomaly() != AnomalyStatus::none && remedies(action, kind_)) {
    resolved_ = true;
    resolvedAt_ = t_;
  }
  StepResult r;
  r.latency = latency_now(action);
  r.resource = resource_now();
  ++t_;
  r.done = t_ >= cfg_.horizon;
  r.state = true_state();
  return r;
}

}  // namespace selfheal
