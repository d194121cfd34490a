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

#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "selfheal/error.hpp"
#include "selfheal/simulator.hpp"

namespace selfheal {

namespace {

using nlohmann::json;

constexpr const char* kGraphFormat = "selfheal-graph";
constexpr int kGraphVersion = 1;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(where + ": unknown field '" + key + "'");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

}  // namespace

void write_graph(std::ostream& out, const ComponentGraph& graph) {
  json nodes = json::array();
  for (const auto& n : graph.nodes()) {
    nodes.push_back({{"id", n.id}, {"kind", to_string(n.kind)}, {"staticFeatures", n.staticFeatures}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back({{"from", graph.nodes()[e.from].id},
                     {"to", graph.nodes()[e.to].id},
                     {"weight", e.weight}});
  }
  json doc = {{"format", kGraphFormat}, {"version", kGraphVersion}, {"nodes", nodes}, {"edges", edges}};
  out << doc.dump(2) << '\n';
}

ComponentGraph read_graph(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("graph file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("graph file: top level must be an object");
  reject_unknown(doc, {"format", "version", "nodes", "edges"}, "graph");
  if (require(doc, "format", "graph") != kGraphFormat) {
    throw SchemaError("graph: format must be '" + std::string(kGraphFormat) + "'");
  }
  if (require(doc, "version", "graph") != kGraphVersion) {
    throw SchemaError("graph: unsupported version " + require(doc, "version", "graph").dump());
  }
  try {
    std::vector<ComponentNode> nodes;
    std::map<std::string, std::size_t> index;
    for (const auto& jn : require(doc, "nodes", "graph")) {
      const std::string where = "graph node " + std::to_string(nodes.size());
      reject_unknown(jn, {"id", "kind", "staticFeatures"}, where);
      ComponentNode n;
      n.id = require(jn, "id", where).get<std::string>();
      n.kind = parse_node_kind(require(jn, "kind", where).get<std::string>());
      n.staticFeatures = require(jn, "staticFeatures", where).get<std::vector<double>>();
      index[n.id] = nodes.size();
      nodes.push_back(std::move(n));
    }
    std::vector<DependencyEdge> edges;
    for (const auto& je : require(doc, "edges", "graph")) {
      const std::string where = "graph edge " + std::to_string(edges.size());
      reject_unknown(je, {"from", "to", "weight"}, where);
      auto endpoint = [&](const char* key) {
        const auto id = require(je, key, where).get<std::string>();
        auto it = index.find(id);
        if (it == index.end()) throw SchemaError(where + ": unknown node '" + id + "'");
        return it->second;
      };
      edges.push_back({endpoint("from"), endpoint("to"), require(je, "weight", where).get<double>()});
    }
    return ComponentGraph(std::move(nodes), std::move(edges));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("graph file: ") + e.what());
  }
}

}  // namespace selfheal
