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

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "selfheal/error.hpp"
#include "selfheal/harness.hpp"
#include "selfheal/rng.hpp"

namespace selfheal {

namespace {

using nlohmann::json;

// Reads a JSON object into config fields, remembering which keys were used so
// leftovers can be reported.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
  }

  template <class Fn>
  void section(const char* key, Fn&& fn) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), path_ + key + ".");
    fn(sub);
    sub.finish();
  }

  void field(const char* key, double& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number()) fail(key, "a number");
    out = v->get<double>();
  }
  void field(const char* key, std::size_t& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_unsigned()) fail(key, "a nonnegative integer");
    out = v->get<std::size_t>();
  }
  void field(const char* key, std::uint64_t& out, int /*seed*/) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_unsigned()) fail(key, "a nonnegative integer");
    out = v->get<std::uint64_t>();
  }
  void field(const char* key, bool& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_boolean()) fail(key, "true or false");
    out = v->get<bool>();
  }
  void field(const char* key, std::string& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string()) fail(key, "a string");
    out = v->get<std::string>();
  }
  void field(const char* key, MetaMode& out) {
    std::string s;
    if (!peek_string(key, s)) return;
    out = parse_meta_mode(s);
  }
  void field(const char* key, Priority& out) {
    std::string s;
    if (!peek_string(key, s)) return;
    out = parse_priority(s);
  }
  void field(const char* key, std::vector<std::size_t>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array()) fail(key, "an array of integers");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number_unsigned()) fail(key, "an array of nonnegative integers");
      out.push_back(e.get<std::size_t>());
    }
  }
  void field(const char* key, RewardWeights& out) {
    section(key, [&](Reader& r) {
      r.field("w1", out.w1);
      r.field("w2", out.w2);
      r.field("w3", out.w3);
    });
  }
  void field(const char* key, std::vector<RewardWeights>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array()) fail(key, "an array of [w1, w2, w3] triples");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
          !e[2].is_number()) {
        fail(key, "an array of [w1, w2, w3] triples");
      }
      out.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
    }
  }
  void field(const char* key, CostTable& out) {
    section(key, [&](Reader& r) {
      for (std::size_t a = 0; a < kActionCount; ++a) {
        const std::string name = to_string(action_from_ordinal(a));
        r.field(name.c_str(), out.cost[a]);
      }
    });
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError("config: unknown key '" + path_ + k + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }
  const json* take(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  bool peek_string(const char* key, std::string& s) {
    const json* v = take(key);
    if (!v) return false;
    if (!v->is_string()) fail(key, "a string");
    s = v->get<std::string>();
    return true;
  }
  [[noreturn]] void fail(const char* key, const char* want) const {
    throw ConfigError("config: '" + path_ + key + "' must be " + want);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

class Writer {
 public:
  explicit Writer(json& j) : j_(j) { j_ = json::object(); }

  template <class Fn>
  void section(const char* key, Fn&& fn) {
    json sub;
    Writer w(sub);
    fn(w);
    j_[key] = std::move(sub);
  }
  template <class T>
  void field(const char* key, const T& v) {
    j_[key] = v;
  }
  void field(const char* key, const std::uint64_t& v, int) { j_[key] = v; }
  void field(const char* key, const MetaMode& v) { j_[key] = to_string(v); }
  void field(const char* key, const Priority& v) { j_[key] = to_string(v); }
  void field(const char* key, const RewardWeights& w) {
    j_[key] = json{{"w1", w.w1}, {"w2", w.w2}, {"w3", w.w3}};
  }
  void field(const char* key, const std::vector<RewardWeights>& g) {
    json a = json::array();
    for (const auto& w : g) a.push_back(json::array({w.w1, w.w2, w.w3}));
    j_[key] = std::move(a);
  }
  void field(const char* key, const CostTable& c) {
    json o = json::object();
    for (std::size_t a = 0; a < kActionCount; ++a) o[to_string(action_from_ordinal(a))] = c.cost[a];
    j_[key] = std::move(o);
  }

 private:
  json& j_;
};

// Single list of every config key, shared by the reader and the writer.
template <class V, class C>
void visit_config(V& v, C& c, bool withRuntime) {
  v.field("seed", c.seed, 0);
  if (withRuntime) v.field("threads", c.threads);
  v.section("simulator", [&](V& s) {
    auto& m = c.simulator;
    s.field("trainPatterns", m.trainPatterns);
    s.field("heldOutPatterns", m.heldOutPatterns);
    s.field("anomalyRate", m.anomalyRate);
    s.field("windowW", m.windowW);
    s.field("nSupport", m.nSupport);
    s.field("nQuery", m.nQuery);
    s.field("jitterStd", m.jitterStd);
    s.field("mixCount", m.mixCount);
    s.field("thresholdC", m.thresholdC);
    s.section("graph", [&](V& g) {
      g.field("disks", m.graph.disks);
      g.field("tables", m.graph.tables);
      g.field("indexes", m.graph.indexes);
      g.field("pools", m.graph.pools);
      g.field("queries", m.graph.queries);
      g.field("minWeight", m.graph.minWeight);
    });
  });
  v.section("detector", [&](V& s) {
    auto& d = c.detector;
    s.field("alpha", d.meta.alpha);
    s.field("beta", d.meta.beta);
    s.field("innerSteps", d.meta.innerSteps);
    s.field("metaBatch", d.meta.metaBatch);
    s.field("metaIterations", d.meta.metaIterations);
    s.field("metaMode", d.meta.metaMode);
    s.field("maxAdaptSteps", d.meta.maxAdaptSteps);
    s.field("convergenceLoss", d.meta.convergenceLoss);
    s.field("fdStep", d.meta.fdStep);
    s.field("hidden", d.hidden);
    s.field("threshold", d.threshold);
  });
  v.section("gnn", [&](V& s) {
    auto& g = c.gnn;
    s.field("layers", g.arch.layers);
    s.field("hidden", g.arch.hidden);
    s.field("epochs", g.epochs);
    s.field("lr", g.lr);
    s.field("trainCascades", g.trainCascades);
    s.field("heldOutCascades", g.heldOutCascades);
    s.field("horizon", g.horizon);
    s.field("tauG", g.tauG);
  });
  v.section("agent", [&](V& s) {
    auto& a = c.agent;
    s.field("episodes", a.episodes);
    s.field("gamma", a.hyper.gamma);
    s.field("lr", a.hyper.lr);
    s.field("epsilonStart", a.hyper.epsilonStart);
    s.field("epsilonEnd", a.hyper.epsilonEnd);
    s.field("warmupEpisodes", a.hyper.warmupEpisodes);
    s.field("weights", a.weights);
    s.field("priority", a.priority);
    s.field("grid", a.grid);
    s.field("costs", a.env.costs);
    s.section("env", [&](V& e) {
      e.field("horizon", a.env.horizon);
      e.field("onsetMin", a.env.onsetMin);
      e.field("onsetMax", a.env.onsetMax);
      e.field("historyTicks", a.env.historyTicks);
    });
  });
  v.section("eval", [&](V& s) {
    auto& e = c.eval;
    s.field("episodes", e.episodes);
    s.field("closedLoopEpisodes", e.closedLoopEpisodes);
    s.field("tickSeconds", e.tickSeconds);
    s.field("attributions", e.attributions);
    s.field("backgroundSize", e.backgroundSize);
  });
  if (withRuntime) {
    v.section("output", [&](V& s) {
      s.field("dir", c.output.dir);
      s.field("json", c.output.json);
      s.field("markdown", c.output.markdown);
    });
  }
}

json to_json_object(const RunConfig& cfg, bool withRuntime) {
  json j;
  Writer w(j);
  visit_config(w, cfg, withRuntime);
  return j;
}

}  // namespace

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  const auto& s = c.simulator;
  require(c.threads >= 1, "threads must be >= 1");
  require(s.trainPatterns >= 1, "simulator.trainPatterns must be >= 1");
  require(s.heldOutPatterns >= 1, "simulator.heldOutPatterns must be >= 1");
  require(s.anomalyRate > 0.0 && s.anomalyRate <= 0.5, "simulator.anomalyRate must lie in (0, 0.5]");
  require(s.windowW >= 1, "simulator.windowW must be >= 1");
  require(s.nSupport >= 2 && s.nQuery >= 2, "simulator.nSupport and nQuery must be >= 2");
  require(s.jitterStd >= 0.0, "simulator.jitterStd must be >= 0");
  require(s.thresholdC > 0.0 && s.thresholdC <= 1.0, "simulator.thresholdC must lie in (0, 1]");
  require(s.graph.disks >= 1 && s.graph.tables >= 1 && s.graph.queries >= 1,
          "simulator.graph needs at least one disk, table and query");
  require(s.graph.minWeight > 0.0 && s.graph.minWeight <= 1.0,
          "simulator.graph.minWeight must lie in (0, 1]");

  const auto& d = c.detector;
  validate(d.meta);
  require(d.meta.maxAdaptSteps >= 1, "detector.maxAdaptSteps must be >= 1");
  require(!d.hidden.empty(), "detector.hidden must list at least one layer");
  for (std::size_t h : d.hidden) require(h >= 1, "detector.hidden widths must be >= 1");
  require(d.threshold > 0.0 && d.threshold < 1.0, "detector.threshold must lie in (0, 1)");

  const auto& g = c.gnn;
  require(g.arch.layers >= 1 && g.arch.hidden >= 1, "gnn.layers and gnn.hidden must be >= 1");
  require(g.lr > 0.0, "gnn.lr must be > 0");
  require(g.trainCascades >= 1 && g.heldOutCascades >= 1, "gnn cascade counts must be >= 1");
  require(g.horizon >= 2, "gnn.horizon must be >= 2");
  require(g.tauG > 0.0 && g.tauG <= 1.0, "gnn.tauG must lie in (0, 1]");

  const auto& a = c.agent;
  validate(a.hyper);
  validate(a.weights);
  require(!a.grid.empty(), "agent.grid must not be empty");
  for (const auto& w : a.grid) validate(w);
  EnvConfig env = a.env;
  env.thresholdC = s.thresholdC;
  validate(env);
  require(env.historyTicks + 1 >= s.windowW, "agent.env.historyTicks must be >= windowW - 1");

  const auto& e = c.eval;
  require(e.episodes >= 1, "eval.episodes must be >= 1");
  require(e.closedLoopEpisodes <= e.episodes, "eval.closedLoopEpisodes must be <= eval.episodes");
  require(e.tickSeconds > 0.0, "eval.tickSeconds must be > 0");
  require(e.backgroundSize >= 1, "eval.backgroundSize must be >= 1");
  require(!c.output.dir.empty(), "output.dir must not be empty");
}

RunConfig parse_config(const std::string& jsonText) {
  json j;
  try {
    j = json::parse(jsonText);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Reader r(j, "");
  visit_config(r, cfg, true);
  r.finish();
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg) { return to_json_object(cfg, true).dump(2) + "\n"; }

std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a64(to_json_object(cfg, false).dump());
}

std::uint64_t stage_seed(const RunConfig& cfg, const char* stage) {
  return derive_seed(cfg.seed, stage);
}

}  // namespace selfheal
