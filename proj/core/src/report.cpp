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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "selfheal/error.hpp"
#include "selfheal/harness.hpp"

namespace selfheal {

namespace {

using nlohmann::json;

json to_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }
Confusion confusion_from(const json& j) {
  return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
          j.at("fn").get<std::size_t>(), j.at("tn").get<std::size_t>()};
}

json to_json(const ObjectiveVector& o) { return {{"o1", o.o1}, {"o2", o.o2}, {"o3", o.o3}}; }
ObjectiveVector objectives_from(const json& j) {
  return {j.at("o1").get<double>(), j.at("o2").get<double>(), j.at("o3").get<double>()};
}

json to_json(const RewardWeights& w) { return {{"w1", w.w1}, {"w2", w.w2}, {"w3", w.w3}}; }
RewardWeights weights_from(const json& j) {
  return {j.at("w1").get<double>(), j.at("w2").get<double>(), j.at("w3").get<double>()};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string fmt_weights(const RewardWeights& w) {
  return "(" + fmt(w.w1) + ", " + fmt(w.w2) + ", " + fmt(w.w3) + ")";
}

}  // namespace

std::string report_to_json(const RunReport& r) {
  json j;
  const DetectionSummary& d = r.detection;
  j["detection"] = {{"precision", d.precision},
                    {"recall", d.recall},
                    {"f1", d.f1},
                    {"baselinePrecision", d.baselinePrecision},
                    {"baselineRecall", d.baselineRecall},
                    {"baselineF1", d.baselineF1},
                    {"confusion", to_json(d.confusion)},
                    {"baselineConfusion", to_json(d.baselineConfusion)},
                    {"tasks", d.tasks},
                    {"initialMetaLoss", d.initialMetaLoss},
                    {"finalMetaLoss", d.finalMetaLoss}};

  json rows = json::array();
  for (const auto& a : r.adaptation.rows) {
    rows.push_back({{"task", a.task}, {"stepsProposed", a.stepsProposed},
                    {"stepsBaseline", a.stepsBaseline}});
  }
  j["adaptation"] = {{"rows", rows},
                     {"medianProposed", r.adaptation.medianProposed},
                     {"medianBaseline", r.adaptation.medianBaseline}};

  const DependencySummary& g = r.dependency;
  j["dependency"] = {{"accuracy", g.accuracy},
                     {"mttfpSeconds", g.mttfpSeconds ? json(*g.mttfpSeconds) : json(nullptr)},
                     {"mttfpDefinedFraction", g.mttfpDefinedFraction},
                     {"falseAlarmRate", g.falseAlarmRate},
                     {"missRate", g.missRate},
                     {"lateRate", g.lateRate},
                     {"cascades", g.cascades},
                     {"initialLoss", g.initialLoss},
                     {"finalLoss", g.finalLoss}};

  const RecoverySummary& rec = r.recovery;
  json policies = json::array();
  for (const auto& p : rec.rows) {
    policies.push_back(
        {{"policy", p.policy}, {"objectives", to_json(p.objectives)}, {"weighted", p.weighted}});
  }
  j["recovery"] = {
      {"weights", to_json(rec.weights)},
      {"normalizers", {{"n1", rec.normalizers.n1}, {"n2", rec.normalizers.n2}, {"n3", rec.normalizers.n3}}},
      {"episodes", rec.episodes},
      {"rows", policies},
      {"latencyImprovementPct", rec.latencyImprovementPct},
      {"resourceImprovementPct", rec.resourceImprovementPct},
      {"costImprovementPct", rec.costImprovementPct},
      {"weightedImprovementPct", rec.weightedImprovementPct},
      {"closedLoopStateAccuracy", rec.closedLoopStateAccuracy}};

  json points = json::array();
  for (const auto& p : r.pareto.points) {
    points.push_back({{"weights", to_json(p.weights)}, {"objectives", to_json(p.objectives)}});
  }
  j["pareto"] = {{"points", points}, {"front", r.pareto.front}};

  json attrs = json::array();
  for (const auto& a : r.attributions) {
    json ranking = json::array();
    for (const auto& k : a.ranking) ranking.push_back({{"action", k.action}, {"q", k.q}, {"gap", k.gap}});
    attrs.push_back({{"episode", a.episode},
                     {"tick", a.tick},
                     {"score", a.score},
                     {"groups", a.groups},
                     {"phi", a.phi},
                     {"baseValue", a.baseValue},
                     {"instanceValue", a.instanceValue},
                     {"inferredState", a.inferredState},
                     {"trueState", a.trueState},
                     {"action", a.action},
                     {"ranking", ranking}});
  }
  j["attributions"] = attrs;
  j["provenance"] = {{"configHash", r.provenance.configHash},
                     {"seed", r.provenance.seed},
                     {"version", r.provenance.version}};
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("report: malformed JSON: ") + e.what());
  }
  RunReport r;
  try {
    const json& d = j.at("detection");
    DetectionSummary& ds = r.detection;
    ds.precision = d.at("precision").get<double>();
    ds.recall = d.at("recall").get<double>();
    ds.f1 = d.at("f1").get<double>();
    ds.baselinePrecision = d.at("baselinePrecision").get<double>();
    ds.baselineRecall = d.at("baselineRecall").get<double>();
    ds.baselineF1 = d.at("baselineF1").get<double>();
    ds.confusion = confusion_from(d.at("confusion"));
    ds.baselineConfusion = confusion_from(d.at("baselineConfusion"));
    ds.tasks = d.at("tasks").get<std::size_t>();
    ds.initialMetaLoss = d.at("initialMetaLoss").get<double>();
    ds.finalMetaLoss = d.at("finalMetaLoss").get<double>();

    const json& a = j.at("adaptation");
    for (const json& row : a.at("rows")) {
      r.adaptation.rows.push_back({row.at("task").get<std::string>(),
                                   row.at("stepsProposed").get<std::size_t>(),
                                   row.at("stepsBaseline").get<std::size_t>()});
    }
    r.adaptation.medianProposed = a.at("medianProposed").get<double>();
    r.adaptation.medianBaseline = a.at("medianBaseline").get<double>();

    const json& g = j.at("dependency");
    DependencySummary& gs = r.dependency;
    gs.accuracy = g.at("accuracy").get<double>();
    if (!g.at("mttfpSeconds").is_null()) gs.mttfpSeconds = g.at("mttfpSeconds").get<double>();
    gs.mttfpDefinedFraction = g.at("mttfpDefinedFraction").get<double>();
    gs.falseAlarmRate = g.at("falseAlarmRate").get<double>();
    gs.missRate = g.at("missRate").get<double>();
    gs.lateRate = g.at("lateRate").get<double>();
    gs.cascades = g.at("cascades").get<std::size_t>();
    gs.initialLoss = g.at("initialLoss").get<double>();
    gs.finalLoss = g.at("finalLoss").get<double>();

    const json& rc = j.at("recovery");
    RecoverySummary& rs = r.recovery;
    rs.weights = weights_from(rc.at("weights"));
    const json& n = rc.at("normalizers");
    rs.normalizers = {n.at("n1").get<double>(), n.at("n2").get<double>(), n.at("n3").get<double>()};
    rs.episodes = rc.at("episodes").get<std::size_t>();
    for (const json& row : rc.at("rows")) {
      rs.rows.push_back({row.at("policy").get<std::string>(), objectives_from(row.at("objectives")),
                         row.at("weighted").get<double>()});
    }
    rs.latencyImprovementPct = rc.at("latencyImprovementPct").get<double>();
    rs.resourceImprovementPct = rc.at("resourceImprovementPct").get<double>();
    rs.costImprovementPct = rc.at("costImprovementPct").get<double>();
    rs.weightedImprovementPct = rc.at("weightedImprovementPct").get<double>();
    rs.closedLoopStateAccuracy = rc.at("closedLoopStateAccuracy").get<double>();

    const json& p = j.at("pareto");
    for (const json& pt : p.at("points")) {
      r.pareto.points.push_back({weights_from(pt.at("weights")), objectives_from(pt.at("objectives"))});
    }
    r.pareto.front = p.at("front").get<std::vector<std::size_t>>();

    for (const json& at : j.at("attributions")) {
      AttributionRecord rec;
      rec.episode = at.at("episode").get<std::size_t>();
      rec.tick = at.at("tick").get<std::size_t>();
      rec.score = at.at("score").get<double>();
      rec.groups = at.at("groups").get<std::vector<std::string>>();
      rec.phi = at.at("phi").get<std::vector<double>>();
      rec.baseValue = at.at("baseValue").get<double>();
      rec.instanceValue = at.at("instanceValue").get<double>();
      rec.inferredState = at.at("inferredState").get<std::string>();
      rec.trueState = at.at("trueState").get<std::string>();
      rec.action = at.at("action").get<std::string>();
      for (const json& k : at.at("ranking")) {
        rec.ranking.push_back({k.at("action").get<std::string>(), k.at("q").get<double>(),
                               k.at("gap").get<double>()});
      }
      r.attributions.push_back(std::move(rec));
    }

    const json& pv = j.at("provenance");
    r.provenance = {pv.at("configHash").get<std::string>(), pv.at("seed").get<std::uint64_t>(),
                    pv.at("version").get<std::string>()};
  } catch (const json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_to_markdown(const RunReport& r) {
  std::ostringstream md;
  md << "# selfheal run report\n\n";
  md << "seed " << r.provenance.seed << ", config " << r.provenance.configHash << ", version "
     << r.provenance.version << "\n\n";

  const DetectionSummary& d = r.detection;
  md << "## Detection\n\n"
     << "| init | precision | recall | F1 |\n|---|---|---|---|\n"
     << "| meta-learned | " << fmt(d.precision) << " | " << fmt(d.recall) << " | " << fmt(d.f1)
     << " |\n"
     << "| random | " << fmt(d.baselinePrecision) << " | " << fmt(d.baselineRecall) << " | "
     << fmt(d.baselineF1) << " |\n\n"
     << "Held-out tasks: " << d.tasks << ". Meta loss " << fmt(d.initialMetaLoss) << " -> "
     << fmt(d.finalMetaLoss) << ".\n\n";

  md << "## Adaptation\n\n| task | meta-learned steps | random-init steps |\n|---|---|---|\n";
  for (const auto& a : r.adaptation.rows) {
    md << "| " << a.task << " | " << a.stepsProposed << " | " << a.stepsBaseline << " |\n";
  }
  md << "| median | " << fmt(r.adaptation.medianProposed) << " | "
     << fmt(r.adaptation.medianBaseline) << " |\n\n";

  const DependencySummary& g = r.dependency;
  md << "## Dependency prediction\n\n| metric | value |\n|---|---|\n"
     << "| node accuracy | " << fmt(g.accuracy) << " |\n"
     << "| MTTFP (s) | " << (g.mttfpSeconds ? fmt(*g.mttfpSeconds) : std::string("n/a")) << " |\n"
     << "| MTTFP defined fraction | " << fmt(g.mttfpDefinedFraction) << " |\n"
     << "| false alarm rate | " << fmt(g.falseAlarmRate) << " |\n"
     << "| miss rate | " << fmt(g.missRate) << " |\n"
     << "| late rate | " << fmt(g.lateRate) << " |\n"
     << "| held-out cascades | " << g.cascades << " |\n"
     << "| training loss | " << fmt(g.initialLoss) << " -> " << fmt(g.finalLoss) << " |\n\n";

  const RecoverySummary& rec = r.recovery;
  md << "## Recovery\n\nWeights " << fmt_weights(rec.weights) << " over " << rec.episodes
     << " episodes.\n\n"
     << "| policy | latency (ms) | resource | cost | weighted |\n|---|---|---|---|---|\n";
  for (const auto& row : rec.rows) {
    md << "| " << row.policy << " | " << fmt(row.objectives.o1) << " | " << fmt(row.objectives.o2)
       << " | " << fmt(row.objectives.o3) << " | " << fmt(row.weighted) << " |\n";
  }
  md << "\nImprovement over random (%): latency " << fmt(rec.latencyImprovementPct)
     << ", resource " << fmt(rec.resourceImprovementPct) << ", cost "
     << fmt(rec.costImprovementPct) << ", weighted " << fmt(rec.weightedImprovementPct) << ".\n"
     << "Closed-loop state accuracy: " << fmt(rec.closedLoopStateAccuracy) << ".\n\n";

  md << "## Pareto sweep\n\n| weights | latency (ms) | resource | cost | front |\n"
        "|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.pareto.points.size(); ++i) {
    const auto& p = r.pareto.points[i];
    bool onFront = false;
    for (std::size_t f : r.pareto.front) onFront = onFront || f == i;
    md << "| " << fmt_weights(p.weights) << " | " << fmt(p.objectives.o1) << " | "
       << fmt(p.objectives.o2) << " | " << fmt(p.objectives.o3) << " | " << (onFront ? "yes" : "")
       << " |\n";
  }

  if (!r.attributions.empty()) {
    md << "\n## Attributions\n\n| episode | tick | score | top group | inferred | true | action |\n"
          "|---|---|---|---|---|---|---|\n";
    for (const auto& a : r.attributions) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < a.phi.size(); ++k)
        if (a.phi[k] > a.phi[best]) best = k;
      md << "| " << a.episode << " | " << a.tick << " | " << fmt(a.score) << " | "
         << (a.groups.empty() ? std::string() : a.groups[best]) << " | " << a.inferredState << " | "
         << a.trueState << " | " << a.action << " |\n";
    }
  }
  return md.str();
}

std::vector<std::string> emit_report(const RunReport& r, const std::string& dir, bool json,
                                     bool markdown) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const char* name, const std::string& text) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out.flush()) throw IoError("write failed for '" + path + "'");
    written.push_back(path);
  };
  if (json) put("report.json", report_to_json(r));
  if (markdown) put("report.md", report_to_markdown(r));
  return written;
}

}  // namespace selfheal
