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

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selfheal/rng.hpp"
#include "selfheal/simulator.hpp"

namespace selfheal {

enum class LoadLevel { low = 0, medium, high };
enum class AnomalyStatus { none = 0, cpu, memory, lock, io, cascade };
enum class FailedBin { zero = 0, quarter, half, over_half };

inline constexpr std::size_t kLoadLevels = 3;
inline constexpr std::size_t kAnomalyStatuses = 6;
inline constexpr std::size_t kFailedBins = 4;
inline constexpr std::size_t kStateCount = kLoadLevels * kAnomalyStatuses * kFailedBins;  // 72

std::string to_string(LoadLevel v);
std::string to_string(AnomalyStatus v);
std::string to_string(FailedBin v);
AnomalyStatus parse_anomaly_status(const std::string& s);

// {0}, (0, 0.25], (0.25, 0.5], > 0.5
FailedBin failed_bin(double fraction);

struct SystemState {
  LoadLevel load = LoadLevel::low;
  AnomalyStatus anomaly = AnomalyStatus::none;
  FailedBin failed = FailedBin::zero;

  std::size_t index() const;
  static SystemState from_index(std::size_t i);
  bool operator==(const SystemState&) const = default;
};
std::string to_string(const SystemState& s);

enum class ActionKind {
  no_op = 0,
  reroute_query,
  scale_up,
  scale_down,
  restart_component,
  rebuild_index,
  throttle_admission
};
inline constexpr std::size_t kActionCount = 7;

std::string to_string(ActionKind a);
ActionKind parse_action(const std::string& s);
ActionKind action_from_ordinal(std::size_t i);

struct CostTable {
  std::array<double, kActionCount> cost{0.0, 1.0, 5.0, 1.0, 8.0, 10.0, 2.0};
  double operator[](ActionKind a) const { return cost[static_cast<std::size_t>(a)]; }
  bool operator==(const CostTable&) const = default;
};
void validate(const CostTable& c);

struct ObjectiveVector {
  double o1 = 0.0;  // mean latency, ms
  double o2 = 0.0;  // mean resource fraction
  double o3 = 0.0;  // summed action cost
  bool operator==(const ObjectiveVector&) const = default;
};

struct RewardWeights {
  double w1 = 1.0 / 3.0;
  double w2 = 1.0 / 3.0;
  double w3 = 1.0 / 3.0;
  bool operator==(const RewardWeights&) const = default;
};
// Nonnegative and summing to 1 within 1e-12; ConfigError otherwise.
void validate(const RewardWeights& w);

struct Normalizers {
  double n1 = 1.0;
  double n2 = 1.0;
  double n3 = 1.0;
  bool operator==(const Normalizers&) const = default;
};

struct EpisodeLog {
  std::vector<double> latency;   // L(t)
  std::vector<double> resource;  // R(t)
  std::vector<ActionKind> actions;
};

// (mean L, mean R, sum of action costs). InputError on an empty trace or
// mismatched series.
ObjectiveVector episode_objectives(const std::vector<double>& latency,
                                   const std::vector<double>& resource,
                                   const std::vector<double>& actionCosts);
ObjectiveVector episode_objectives(const EpisodeLog& log, const CostTable& costs);

// -[w1 d1/n1 + w2 d2/n2 + w3 d3/n3] with d = next - prev.
double reward(const ObjectiveVector& prev, const ObjectiveVector& next, const RewardWeights& w,
              const Normalizers& n);

// w1 o1/n1 + w2 o2/n2 + w3 o3/n3.
double weighted_objective(const ObjectiveVector& o, const RewardWeights& w, const Normalizers& n);

enum class Priority { latency_first, cost_first, balanced };
std::string to_string(Priority p);
Priority parse_priority(const std::string& s);
RewardWeights dynamic_weights(Priority priority, const RewardWeights& base);

// ---------------------------------------------------------------- environment

struct StepResult {
  SystemState state;  // state observed after the action
  double latency = 0.0;
  double resource = 0.0;
  bool done = false;
};

// Episodic environment over the discretised state space. Episodes have fixed
// length horizon(); reset() fully determines an episode from its seed, so
// two policies given the same seed face the same workload and anomaly.
class RecoveryEnvironment {
 public:
  virtual ~RecoveryEnvironment() = default;
  virtual std::size_t horizon() const = 0;
  virtual const CostTable& costs() const = 0;
  virtual SystemState reset(std::uint64_t episodeSeed) = 0;
  virtual StepResult step(ActionKind action) = 0;
  virtual std::unique_ptr<RecoveryEnvironment> clone() const = 0;
};

struct EnvConfig {
  std::size_t horizon = 30;
  std::size_t onsetMin = 2;
  std::size_t onsetMax = 8;
  double thresholdC = 0.5;
  std::size_t historyTicks = 4;  // pre-episode telemetry kept for detector windows
  CostTable costs;
};
void validate(const EnvConfig& c);

// Simulated database under a single injected anomaly per episode. The anomaly
// persists until its remedy is applied: cpu -> scale_up, memory ->
// restart_component, lock -> throttle_admission, io -> rebuild_index,
// cascade -> restart_component (reroute_query only dampens it). Capacity
// units (1..3) trade latency against resource usage.
class DatabaseRecoveryEnv final : public RecoveryEnvironment {
 public:
  DatabaseRecoveryEnv(WorkloadPattern pattern, ComponentGraph graph, EnvConfig cfg);

  std::size_t horizon() const override { return cfg_.horizon; }
  const CostTable& costs() const override { return cfg_.costs; }
  SystemState reset(std::uint64_t episodeSeed) override;
  StepResult step(ActionKind action) override;
  std::unique_ptr<RecoveryEnvironment> clone() const override;

  const WorkloadPattern& pattern() const { return pattern_; }
  const ComponentGraph& graph() const { return graph_; }
  const EnvConfig& config() const { return cfg_; }
  // qps cut points for LoadLevel (33rd / 66th percentile of the pattern).
  std::pair<double, double> load_thresholds() const { return loadCuts_; }

  // Observable signals for a closed-loop controller.
  std::size_t tick() const { return t_; }
  SystemState true_state() const;
  // Telemetry of the last w ticks ending at the current tick (history
  // included), as consumed by window_features.
  Trace recent_telemetry(std::size_t w) const;
  // Per-node telemetry at the current tick, one single-tick Trace per node.
  std::vector<Trace> node_snapshot() const;
  AnomalyStatus active_anomaly() const;
  std::size_t anomaly_onset() const { return onset_; }
  double failed_fraction() const;

 private:
  double latency_now(ActionKind action) const;
  double resource_now() const;

  WorkloadPattern pattern_;
  ComponentGraph graph_;
  EnvConfig cfg_;
  std::pair<double, double> loadCuts_{0.0, 0.0};
  double baseQps_ = 1.0;

  // Episode state.
  Trace clean_;  // history + horizon ticks without the anomaly
  AnomalyKind kind_ = AnomalyKind::cpu_spike;
  double magnitude_ = 1.0;
  std::size_t onset_ = 0;
  std::optional<CascadeTrace> cascade_;
  std::vector<Trace> healthyNodes_;
  std::size_t t_ = 0;
  bool resolved_ = false;
  std::size_t resolvedAt_ = 0;
  bool rerouted_ = false;
  int capacity_ = 2;
};

// ---------------------------------------------------------------- agent

struct AgentHyper {
  double gamma = 0.95;
  double lr = 0.1;
  double epsilonStart = 0.3;
  double epsilonEnd = 0.01;
  std::size_t warmupEpisodes = 10;  // random-policy episodes for the normalizers
};
void validate(const AgentHyper& h);

struct Policy {
  std::vector<double> q = std::vector<double>(kStateCount * kActionCount, 0.0);
  RewardWeights weights;
  Normalizers normalizers;
  double epsilon = 0.0;  // final exploration rate used in training
  double gamma = 0.95;
  double lr = 0.1;

  double value(const SystemState& s, ActionKind a) const;
  double& value(const SystemState& s, ActionKind a);
  // argmax_a Q(s,a); ties go to the lowest ordinal.
  ActionKind greedy(const SystemState& s) const;
  bool operator==(const Policy&) const = default;
};

void write_policy(std::ostream& out, const Policy& p);
Policy read_policy(std::istream& in);

struct TrainAgentResult {
  Policy policy;
  std::vector<double> returns;  // per training episode
};

// Chooses an action for a state; rng is a per-episode stream.
using ActionChooser = std::function<ActionKind(const SystemState&, Rng&)>;
ActionChooser greedy_chooser(const Policy& p);
ActionChooser random_chooser();
ActionChooser noop_chooser();

// Runs one full episode; the chooser's rng is seeded from the episode seed.
EpisodeLog run_episode(RecoveryEnvironment& env, const ActionChooser& choose,
                       std::uint64_t episodeSeed);

// Mean objectives over the given episode seeds.
ObjectiveVector evaluate_policy(RecoveryEnvironment& env, const ActionChooser& choose,
                                const std::vector<std::uint64_t>& episodeSeeds);

// Mean objective magnitudes of random-policy episodes; 0 becomes 1.
Normalizers estimate_normalizers(RecoveryEnvironment& env, std::size_t episodes,
                                 std::uint64_t seed);

// Tabular Q-learning with linearly decaying epsilon-greedy exploration.
// Normalizers are estimated first unless supplied.
TrainAgentResult train_agent(RecoveryEnvironment& env, const RewardWeights& w,
                             std::size_t episodes, const AgentHyper& hyper, std::uint64_t seed,
                             std::optional<Normalizers> normalizers = std::nullopt);

// Held-out evaluation episode seeds.
std::vector<std::uint64_t> episode_seeds(std::uint64_t seed, std::size_t count);

// ---------------------------------------------------------------- pareto

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);
// Indices of non-dominated points in input order; duplicates are all kept.
std::vector<std::size_t> pareto_indices(const std::vector<ObjectiveVector>& points);
std::vector<ObjectiveVector> pareto_front(const std::vector<ObjectiveVector>& points);

struct SweepPoint {
  RewardWeights weights;
  ObjectiveVector objectives;
  bool operator==(const SweepPoint&) const = default;
};
struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::size_t> front;  // indices into points
  Normalizers normalizers;
};

// One agent per weight vector, trained on a clone of env and evaluated
// greedily on evalSeeds. Grid points may run on `threads` workers.
SweepResult weight_sweep(const RecoveryEnvironment& env, const std::vector<RewardWeights>& grid,
                         std::size_t episodes, const AgentHyper& hyper, std::uint64_t seed,
                         const std::vector<std::uint64_t>& evalSeeds, std::size_t threads = 1);

// Points of the simplex with the given number of divisions per axis.
std::vector<RewardWeights> simplex_grid(std::size_t divisions);

}  // namespace selfheal
