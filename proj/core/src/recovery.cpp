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

#include "selfheal/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>

#include "selfheal/error.hpp"
#include "selfheal/parallel.hpp"

namespace selfheal {

namespace {

constexpr const char* kLoadNames[] = {"low", "medium", "high"};
constexpr const char* kStatusNames[] = {"none", "cpu", "memory", "lock", "io", "cascade"};
constexpr const char* kBinNames[] = {"0", "(0,0.25]", "(0.25,0.5]", ">0.5"};
constexpr const char* kActionNames[] = {"no_op",        "reroute_query",     "scale_up",
                                        "scale_down",   "restart_component", "rebuild_index",
                                        "throttle_admission"};

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size()) throw IoError(std::string("policy file: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace

std::string to_string(LoadLevel v) { return kLoadNames[static_cast<std::size_t>(v)]; }
std::string to_string(AnomalyStatus v) { return kStatusNames[static_cast<std::size_t>(v)]; }
std::string to_string(FailedBin v) { return kBinNames[static_cast<std::size_t>(v)]; }

AnomalyStatus parse_anomaly_status(const std::string& s) {
  for (std::size_t i = 0; i < kAnomalyStatuses; ++i)
    if (s == kStatusNames[i]) return static_cast<AnomalyStatus>(i);
  throw ConfigError("unknown anomaly status '" + s + "'");
}

FailedBin failed_bin(double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InputError("failed_bin: fraction must lie in [0, 1]");
  }
  if (fraction == 0.0) return FailedBin::zero;
  if (fraction <= 0.25) return FailedBin::quarter;
  if (fraction <= 0.5) return FailedBin::half;
  return FailedBin::over_half;
}

std::size_t SystemState::index() const {
  return (static_cast<std::size_t>(load) * kAnomalyStatuses + static_cast<std::size_t>(anomaly)) *
             kFailedBins +
         static_cast<std::size_t>(failed);
}

SystemState SystemState::from_index(std::size_t i) {
  if (i >= kStateCount) throw InputError("state index " + std::to_string(i) + " out of range");
  SystemState s;
  s.failed = static_cast<FailedBin>(i % kFailedBins);
  i /= kFailedBins;
  s.anomaly = static_cast<AnomalyStatus>(i % kAnomalyStatuses);
  s.load = static_cast<LoadLevel>(i / kAnomalyStatuses);
  return s;
}

std::string to_string(const SystemState& s) {
  return to_string(s.load) + "/" + to_string(s.anomaly) + "/" + to_string(s.failed);
}

std::string to_string(ActionKind a) { return kActionNames[static_cast<std::size_t>(a)]; }

ActionKind parse_action(const std::string& s) {
  for (std::size_t i = 0; i < kActionCount; ++i)
    if (s == kActionNames[i]) return static_cast<ActionKind>(i);
  throw ConfigError("unknown action '" + s + "'");
}

ActionKind action_from_ordinal(std::size_t i) {
  if (i >= kActionCount) throw InputError("action ordinal " + std::to_string(i) + " out of range");
  return static_cast<ActionKind>(i);
}

void validate(const CostTable& c) {
  for (std::size_t i = 0; i < kActionCount; ++i) {
    if (!(c.cost[i] >= 0.0) || !std::isfinite(c.cost[i])) {
      throw ConfigError(std::string("action cost for ") + kActionNames[i] +
                        " must be finite and >= 0");
    }
  }
}

void validate(const RewardWeights& w) {
  if (!(w.w1 >= 0.0 && w.w2 >= 0.0 && w.w3 >= 0.0)) {
    throw ConfigError("reward weights must be nonnegative");
  }
  if (std::abs(w.w1 + w.w2 + w.w3 - 1.0) > 1e-12) {
    throw ConfigError("reward weights must sum to 1");
  }
}

ObjectiveVector episode_objectives(const std::vector<double>& latency,
                                   const std::vector<double>& resource,
                                   const std::vector<double>& actionCosts) {
  if (latency.empty()) throw InputError("episode_objectives: empty trace");
  if (resource.size() != latency.size()) {
    throw InputError("episode_objectives: latency and resource series differ in length");
  }
  const double T = static_cast<double>(latency.size());
  ObjectiveVector o;
  for (double l : latency) o.o1 += l;
  for (double r : resource) o.o2 += r;
  for (double c : actionCosts) o.o3 += c;
  o.o1 /= T;
  o.o2 /= T;
  return o;
}

ObjectiveVector episode_objectives(const EpisodeLog& log, const CostTable& costs) {
  std::vector<double> c;
  c.reserve(log.actions.size());
  for (ActionKind a : log.actions) c.push_back(costs[a]);
  return episode_objectives(log.latency, log.resource, c);
}

double reward(const ObjectiveVector& prev, const ObjectiveVector& next, const RewardWeights& w,
              const Normalizers& n) {
  if (!(n.n1 > 0.0 && n.n2 > 0.0 && n.n3 > 0.0)) {
    throw ConfigError("reward: normalizers must be positive");
  }
  return -(w.w1 * (next.o1 - prev.o1) / n.n1 + w.w2 * (next.o2 - prev.o2) / n.n2 +
           w.w3 * (next.o3 - prev.o3) / n.n3);
}

double weighted_objective(const ObjectiveVector& o, const RewardWeights& w, const Normalizers& n) {
  if (!(n.n1 > 0.0 && n.n2 > 0.0 && n.n3 > 0.0)) {
    throw ConfigError("weighted_objective: normalizers must be positive");
  }
  return w.w1 * o.o1 / n.n1 + w.w2 * o.o2 / n.n2 + w.w3 * o.o3 / n.n3;
}

std::string to_string(Priority p) {
  switch (p) {
    case Priority::latency_first: return "latency_first";
    case Priority::cost_first: return "cost_first";
    case Priority::balanced: return "balanced";
  }
  return "?";
}

Priority parse_priority(const std::string& s) {
  if (s == "latency_first") return Priority::latency_first;
  if (s == "cost_first") return Priority::cost_first;
  if (s == "balanced") return Priority::balanced;
  throw ConfigError("unknown priority '" + s + "'");
}

RewardWeights dynamic_weights(Priority priority, const RewardWeights& base) {
  switch (priority) {
    case Priority::latency_first: return {0.6, 0.2, 0.2};
    case Priority::cost_first: return {0.2, 0.2, 0.6};
    case Priority::balanced: break;
  }
  if (!(base.w1 >= 0.0 && base.w2 >= 0.0 && base.w3 >= 0.0)) {
    throw ConfigError("dynamic_weights: base weights must be nonnegative");
  }
  const double s = base.w1 + base.w2 + base.w3;
  if (!(s > 0.0)) throw ConfigError("dynamic_weights: base weights sum to zero");
  return {base.w1 / s, base.w2 / s, base.w3 / s};
}

// ---------------------------------------------------------------- agent

void validate(const AgentHyper& h) {
  if (!(h.gamma >= 0.0 && h.gamma <= 1.0)) throw ConfigError("agent.gamma must lie in [0, 1]");
  if (!(h.lr > 0.0 && h.lr <= 1.0)) throw ConfigError("agent.lr must lie in (0, 1]");
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(h.epsilonStart) || !prob(h.epsilonEnd)) {
    throw ConfigError("agent epsilon schedule must lie in [0, 1]");
  }
}

double Policy::value(const SystemState& s, ActionKind a) const {
  return q.at(s.index() * kActionCount + static_cast<std::size_t>(a));
}

double& Policy::value(const SystemState& s, ActionKind a) {
  return q.at(s.index() * kActionCount + static_cast<std::size_t>(a));
}

ActionKind Policy::greedy(const SystemState& s) const {
  const std::size_t base = s.index() * kActionCount;
  std::size_t best = 0;
  for (std::size_t a = 1; a < kActionCount; ++a)
    if (q[base + a] > q[base + best]) best = a;
  return static_cast<ActionKind>(best);
}

void write_policy(std::ostream& out, const Policy& p) {
  out << "selfheal-policy 1\n";
  out << "weights " << hex(p.weights.w1) << ' ' << hex(p.weights.w2) << ' ' << hex(p.weights.w3)
      << '\n';
  out << "normalizers " << hex(p.normalizers.n1) << ' ' << hex(p.normalizers.n2) << ' '
      << hex(p.normalizers.n3) << '\n';
  out << "hyper " << hex(p.epsilon) << ' ' << hex(p.gamma) << ' ' << hex(p.lr) << '\n';
  out << "table " << kStateCount << ' ' << kActionCount << '\n';
  for (std::size_t s = 0; s < kStateCount; ++s) {
    const SystemState st = SystemState::from_index(s);
    for (std::size_t a = 0; a < kActionCount; ++a) {
      out << to_string(st) << ' ' << kActionNames[a] << ' ' << hex(p.q[s * kActionCount + a])
          << '\n';
    }
  }
  out << "end\n";
  if (!out) throw IoError("write_policy: stream failure");
}

Policy read_policy(std::istream& in) {
  auto expect = [&](const std::string& want) {
    std::string tok;
    if (!(in >> tok) || tok != want) throw IoError("policy file: expected '" + want + "'");
  };
  auto num = [&](const char* what) {
    std::string tok;
    if (!(in >> tok)) throw IoError(std::string("policy file: missing ") + what);
    return parse_double(tok, what);
  };
  expect("selfheal-policy");
  expect("1");
  Policy p;
  expect("weights");
  p.weights = {num("weight"), num("weight"), num("weight")};
  expect("normalizers");
  p.normalizers = {num("normalizer"), num("normalizer"), num("normalizer")};
  expect("hyper");
  p.epsilon = num("epsilon");
  p.gamma = num("gamma");
  p.lr = num("lr");
  expect("table");
  expect(std::to_string(kStateCount));
  expect(std::to_string(kActionCount));
  for (std::size_t s = 0; s < kStateCount; ++s) {
    const SystemState st = SystemState::from_index(s);
    for (std::size_t a = 0; a < kActionCount; ++a) {
      expect(to_string(st));
      expect(kActionNames[a]);
      p.q[s * kActionCount + a] = num("q value");
    }
  }
  expect("end");
  return p;
}

ActionChooser greedy_chooser(const Policy& p) {
  return [p](const SystemState& s, Rng&) { return p.greedy(s); };
}

ActionChooser random_chooser() {
  return [](const SystemState&, Rng& rng) { return action_from_ordinal(rng.below(kActionCount)); };
}

ActionChooser noop_chooser() {
  return [](const SystemState&, Rng&) { return ActionKind::no_op; };
}

EpisodeLog run_episode(RecoveryEnvironment& env, const ActionChooser& choose,
                       std::uint64_t episodeSeed) {
  Rng rng(derive_seed(episodeSeed, "policy"));
  EpisodeLog log;
  SystemState s = env.reset(episodeSeed);
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    const ActionKind a = choose(s, rng);
    const StepResult r = env.step(a);
    log.latency.push_back(r.latency);
    log.resource.push_back(r.resource);
    log.actions.push_back(a);
    s = r.state;
    if (r.done) break;
  }
  return log;
}

ObjectiveVector evaluate_policy(RecoveryEnvironment& env, const ActionChooser& choose,
                                const std::vector<std::uint64_t>& episodeSeeds) {
  if (episodeSeeds.empty()) throw InputError("evaluate_policy: no episodes");
  ObjectiveVector total;
  for (std::uint64_t s : episodeSeeds) {
    const ObjectiveVector o = episode_objectives(run_episode(env, choose, s), env.costs());
    total.o1 += o.o1;
    total.o2 += o.o2;
    total.o3 += o.o3;
  }
  const double n = static_cast<double>(episodeSeeds.size());
  return {total.o1 / n, total.o2 / n, total.o3 / n};
}

std::vector<std::uint64_t> episode_seeds(std::uint64_t seed, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = derive_seed(seed, i);
  return out;
}

Normalizers estimate_normalizers(RecoveryEnvironment& env, std::size_t episodes,
                                 std::uint64_t seed) {
  if (episodes == 0) return {};
  const ObjectiveVector m = evaluate_policy(env, random_chooser(), episode_seeds(seed, episodes));
  auto fix = [](double v) { return std::abs(v) > 0.0 ? std::abs(v) : 1.0; };
  return {fix(m.o1), fix(m.o2), fix(m.o3)};
}

TrainAgentResult train_agent(RecoveryEnvironment& env, const RewardWeights& w,
                             std::size_t episodes, const AgentHyper& hyper, std::uint64_t seed,
                             std::optional<Normalizers> normalizers) {
  validate(w);
  validate(hyper);
  TrainAgentResult out;
  Policy& p = out.policy;
  p.weights = w;
  p.gamma = hyper.gamma;
  p.lr = hyper.lr;
  p.normalizers = normalizers ? *normalizers
                              : estimate_normalizers(env, hyper.warmupEpisodes,
                                                     derive_seed(seed, "warmup"));
  p.epsilon = episodes == 0 ? hyper.epsilonStart : hyper.epsilonEnd;
  Rng explore(derive_seed(seed, "explore"));
  const std::uint64_t episodeRoot = derive_seed(seed, "episodes");
  const double T = static_cast<double>(env.horizon());
  out.returns.reserve(episodes);

  for (std::size_t e = 0; e < episodes; ++e) {
    const double frac = episodes > 1 ? static_cast<double>(e) / static_cast<double>(episodes - 1)
                                     : 0.0;
    const double eps = hyper.epsilonStart + (hyper.epsilonEnd - hyper.epsilonStart) * frac;
    SystemState s = env.reset(derive_seed(episodeRoot, e));
    ObjectiveVector prev;
    double ret = 0.0;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      ActionKind a = explore.uniform() < eps ? action_from_ordinal(explore.below(kActionCount))
                                             : p.greedy(s);
      const StepResult r = env.step(a);
      const ObjectiveVector next{prev.o1 + r.latency / T, prev.o2 + r.resource / T,
                                 prev.o3 + env.costs()[a]};
      const double rew = reward(prev, next, w, p.normalizers);
      double target = rew;
      if (!r.done) target += hyper.gamma * p.value(r.state, p.greedy(r.state));
      double& qsa = p.value(s, a);
      qsa += hyper.lr * (target - qsa);
      ret += rew;
      prev = next;
      s = r.state;
      if (r.done) break;
    }
    out.returns.push_back(ret);
  }
  return out;
}

// ---------------------------------------------------------------- pareto

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  const bool le = a.o1 <= b.o1 && a.o2 <= b.o2 && a.o3 <= b.o3;
  const bool lt = a.o1 < b.o1 || a.o2 < b.o2 || a.o3 < b.o3;
  return le && lt;
}

std::vector<std::size_t> pareto_indices(const std::vector<ObjectiveVector>& points) {
  // Any dominator of p precedes p lexicographically, and dominance is
  // transitive, so checking each point against the front built so far is
  // enough.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& p = points[a];
    const auto& q = points[b];
    if (p.o1 != q.o1) return p.o1 < q.o1;
    if (p.o2 != q.o2) return p.o2 < q.o2;
    return p.o3 < q.o3;
  });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    bool dominated = false;
    for (std::size_t f : front) {
      if (dominates(points[f], points[i])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  return front;
}

std::vector<ObjectiveVector> pareto_front(const std::vector<ObjectiveVector>& points) {
  std::vector<ObjectiveVector> out;
  for (std::size_t i : pareto_indices(points)) out.push_back(points[i]);
  return out;
}

SweepResult weight_sweep(const RecoveryEnvironment& env, const std::vector<RewardWeights>& grid,
                         std::size_t episodes, const AgentHyper& hyper, std::uint64_t seed,
                         const std::vector<std::uint64_t>& evalSeeds, std::size_t threads) {
  if (grid.empty()) throw InputError("weight_sweep: empty weight grid");
  for (const auto& w : grid) validate(w);
  SweepResult out;
  {
    auto warm = env.clone();
    out.normalizers = estimate_normalizers(*warm, hyper.warmupEpisodes, derive_seed(seed, "warmup"));
  }
  const Normalizers n = out.normalizers;
  const auto objectives = parallel_map(grid.size(), threads, [&](std::size_t i) {
    auto local = env.clone();
    const TrainAgentResult trained =
        train_agent(*local, grid[i], episodes, hyper, derive_seed(seed, i), n);
    return evaluate_policy(*local, greedy_chooser(trained.policy), evalSeeds);
  });
  std::vector<ObjectiveVector> pts;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.points.push_back({grid[i], objectives[i]});
    pts.push_back(objectives[i]);
  }
  out.front = pareto_indices(pts);
  return out;
}

std::vector<RewardWeights> simplex_grid(std::size_t divisions) {
  if (divisions == 0) throw ConfigError("simplex_grid: divisions must be >= 1");
  std::vector<RewardWeights> out;
  const double d = static_cast<double>(divisions);
  for (std::size_t i = 0; i <= divisions; ++i) {
    for (std::size_t j = 0; i + j <= divisions; ++j) {
      RewardWeights w{static_cast<double>(i) / d, static_cast<double>(j) / d, 0.0};
      w.w3 = static_cast<double>(divisions - i - j) / d;
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace selfheal
