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

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "selfheal/error.hpp"
#include "selfheal/simulator.hpp"

namespace selfheal {

namespace {

constexpr const char* kFields[] = {"cpu", "memory", "latencyMs", "ioOps", "qps", "label"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

}  // namespace

SchemaMap identity_schema() {
  SchemaMap s;
  for (const char* f : kFields) s.emplace(f, f);
  return s;
}

IngestResult ingest_csv(const std::string& path, const SchemaMap& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return ingest_csv(in, schema);
}

IngestResult ingest_csv(std::istream& in, const SchemaMap& schema) {
  for (const auto& [column, field] : schema) {
    bool known = false;
    for (const char* f : kFields) known = known || field == f;
    if (!known) throw SchemaError("schema maps column '" + column + "' to unknown field '" + field + "'");
  }
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  // field -> column position
  std::map<std::string, std::size_t> pos;
  for (const auto& [column, field] : schema) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == column) pos[field] = i;
    }
  }
  for (const char* f : kFields) {
    if (pos.contains(f)) continue;
    std::string column = f;
    for (const auto& [c, field] : schema)
      if (field == f) column = c;
    throw SchemaError("missing column '" + column + "' for field '" + f + "'");
  }

  IngestResult result;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](const char* field) {
      const std::size_t i = pos.at(field);
      if (i >= cells.size()) throw RowError(lineno, std::string("missing cell for ") + field);
      const std::string& s = cells[i];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw RowError(lineno, std::string("cannot parse ") + field + " value '" + s + "'");
      }
      return v;
    };
    TelemetryWindow w;
    w.index = result.windows.size();
    for (std::size_t m = 0; m < kMetricCount; ++m) w.set_metric(static_cast<Metric>(m), cell(kFields[m]));
    const double label = cell("label");
    if (label != 0.0 && label != 1.0) throw RowError(lineno, "label must be 0 or 1");
    w.label = static_cast<int>(label);
    const MetricArray before = w.metrics();
    if (clamp_window(w)) {
      const MetricArray after = w.metrics();
      for (std::size_t m = 0; m < kMetricCount; ++m) {
        if (before[m] != after[m]) {
          ++result.clampCount;
          ++result.clampsByField[kFields[m]];
        }
      }
    }
    result.windows.push_back(w);
  }
  return result;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "index,cpu,memory,latencyMs,ioOps,qps,label\n";
  char buf[256];
  for (const auto& w : trace) {
    std::snprintf(buf, sizeof buf, "%llu,%.6g,%.6g,%.6g,%.6g,%.6g,%d\n",
                  static_cast<unsigned long long>(w.index), w.cpu, w.memory, w.latencyMs, w.ioOps,
                  w.qps, w.label);
    out << buf;
  }
}

}  // namespace selfheal
