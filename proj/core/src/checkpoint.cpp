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
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "selfheal/detector.hpp"
#include "selfheal/error.hpp"

namespace selfheal {

namespace {

constexpr const char* kMagic = "selfheal-detector";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw SchemaError("checkpoint: bad number '" + s + "'");
  return v;
}

std::string expect_word(std::istream& in, const char* what) {
  std::string w;
  if (!(in >> w)) throw SchemaError(std::string("checkpoint: truncated before ") + what);
  return w;
}

void expect_keyword(std::istream& in, const char* kw) {
  const std::string w = expect_word(in, kw);
  if (w != kw) throw SchemaError("checkpoint: expected '" + std::string(kw) + "', got '" + w + "'");
}

}  // namespace

void write_params(std::ostream& out, const ParamSet& params) {
  out << "params " << params.size() << '\n';
  for (const auto& [name, t] : params) {
    out << name << ' ' << t.rank();
    for (std::size_t e : t.shape()) out << ' ' << e;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << hex(t[i]);
    out << '\n';
  }
}

ParamSet read_params(std::istream& in) {
  expect_keyword(in, "params");
  const std::size_t count = std::stoul(expect_word(in, "parameter count"));
  ParamSet params;
  for (std::size_t p = 0; p < count; ++p) {
    const std::string name = expect_word(in, "parameter name");
    const std::size_t rank = std::stoul(expect_word(in, "rank"));
    Shape shape(rank);
    for (auto& e : shape) e = std::stoul(expect_word(in, "extent"));
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = parse_hex(expect_word(in, "value"));
    params.emplace(name, Tensor(std::move(shape), std::move(v)));
  }
  return params;
}

void save_checkpoint(std::ostream& out, const DetectorModel& model) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "threshold " << hex(model.threshold) << '\n';
  out << "layers " << model.layers.size() << '\n';
  for (const Layer& l : model.layers) out << l.width << ' ' << to_string(l.activation) << '\n';
  write_params(out, model.params);
  out << "end\n";
  if (!out) throw IoError("checkpoint: write failed");
}

DetectorModel load_checkpoint(std::istream& in) {
  if (expect_word(in, "magic") != kMagic) throw SchemaError("checkpoint: not a detector checkpoint");
  const int version = std::stoi(expect_word(in, "version"));
  if (version != kVersion) throw SchemaError("checkpoint: unsupported version " + std::to_string(version));
  DetectorModel m;
  expect_keyword(in, "threshold");
  m.threshold = parse_hex(expect_word(in, "threshold value"));
  expect_keyword(in, "layers");
  const std::size_t n = std::stoul(expect_word(in, "layer count"));
  for (std::size_t i = 0; i < n; ++i) {
    Layer l;
    l.width = std::stoul(expect_word(in, "layer width"));
    l.activation = parse_activation(expect_word(in, "activation"));
    m.layers.push_back(l);
  }
  m.params = read_params(in);
  expect_keyword(in, "end");
  return m;
}

}  // namespace selfheal
