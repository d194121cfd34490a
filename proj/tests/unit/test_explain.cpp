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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "selfheal/error.hpp"
#include "selfheal/explain.hpp"
#include "selfheal/rng.hpp"

namespace selfheal {
namespace {

FeatureGroups singletons(std::size_t n) {
  FeatureGroups g;
  for (std::size_t i = 0; i < n; ++i) {
    g.members.push_back({i});
    g.names.push_back("f" + std::to_string(i));
  }
  return g;
}

BatchModel linear_model(std::vector<double> w, double b) {
  return [w, b](const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(std::inner_product(w.begin(), w.end(), r.begin(), b));
    return out;
  };
}

// Nonlinear model with pairwise interactions.
BatchModel interaction_model(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(d), m(d * d);
  for (double& v : w) v = rng.normal();
  for (double& v : m) v = rng.normal() * 0.5;
  return [=](const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        s += w[i] * r[i];
        for (std::size_t j = 0; j < d; ++j) s += m[i * d + j] * r[i] * r[j];
      }
      out.push_back(std::tanh(s));
    }
    return out;
  };
}

// Average marginal contribution over all orderings of the groups.
std::vector<double> permutation_oracle(const BatchModel& f, const std::vector<double>& x,
                                       const std::vector<std::vector<double>>& bg, const FeatureGroups& g) {
  auto value = [&](const std::vector<bool>& in) {
    std::vector<std::vector<double>> rows = bg;
    for (auto& r : rows)
      for (std::size_t k = 0; k < g.size(); ++k)
        if (in[k])
          for (std::size_t i : g.members[k]) r[i] = x[i];
    const auto out = f(rows);
    return std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  };
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(g.size(), 0.0);
  double count = 0.0;
  do {
    std::vector<bool> in(g.size(), false);
    double prev = value(in);
    for (std::size_t k : order) {
      in[k] = true;
      const double cur = value(in);
      phi[k] += cur - prev;
      prev = cur;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& p : phi) p /= count;
  return phi;
}

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows)
    for (double& v : r) v = rng.normal();
  return rows;
}

TEST(Shapley, ConstantModelGivesZeros) {
  const BatchModel c = [](const std::vector<std::vector<double>>& rows) {
    return std::vector<double>(rows.size(), 0.7);
  };
  Rng rng(1);
  const Attribution a = shapley_attribution(c, {1, 2, 3}, random_rows(4, 3, rng), singletons(3));
  for (double p : a.phi) EXPECT_EQ(p, 0.0);
  EXPECT_EQ(a.baseValue, 0.7);
  EXPECT_EQ(a.instanceValue, 0.7);
}

TEST(Shapley, LinearClosedForm) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    std::vector<double> w(d);
    for (double& v : w) v = rng.normal();
    const auto bg = random_rows(1 + rng.below(6), d, rng);
    const auto x = random_rows(1, d, rng)[0];
    const Attribution a = shapley_attribution(linear_model(w, 0.3), x, bg, singletons(d));
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (const auto& r : bg) mean += r[j];
      mean /= static_cast<double>(bg.size());
      EXPECT_NEAR(a.phi[j], w[j] * (x[j] - mean), 1e-9);
    }
  }
}

TEST(Shapley, MatchesPermutationDefinitionWithGroups) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 6;
    FeatureGroups g;
    g.members = {{0, 3}, {1}, {2, 4, 5}};
    if (trial % 2) g.members = {{5}, {0, 1}, {2}, {3}, {4}};
    for (std::size_t k = 0; k < g.members.size(); ++k) g.names.push_back("g" + std::to_string(k));
    const BatchModel f = interaction_model(d, 10 + trial);
    const auto bg = random_rows(5, d, rng);
    const auto x = random_rows(1, d, rng)[0];
    const Attribution a = shapley_attribution(f, x, bg, g);
    const auto oracle = permutation_oracle(f, x, bg, g);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(a.phi[k], oracle[k], 1e-12);
    EXPECT_EQ(a.groupNames, g.names);
  }
}

TEST(Shapley, EfficiencyOnRandomCases) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.below(9);
    const BatchModel f = interaction_model(d, 100 + trial);
    const Attribution a = shapley_attribution(f, random_rows(1, d, rng)[0], random_rows(3, d, rng), singletons(d));
    const double total = std::accumulate(a.phi.begin(), a.phi.end(), a.baseValue);
    EXPECT_NEAR(total, a.instanceValue, 1e-9);
  }
}

TEST(Shapley, SymmetryAndDummy) {
  // f = sigmoid(x0 + x1) + 0 * x2: groups 0 and 1 are symmetric, 2 is a dummy.
  const BatchModel f = [](const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(1.0 / (1.0 + std::exp(-(r[0] + r[1]))) + 0.0 * r[2]);
    return out;
  };
  const std::vector<std::vector<double>> bg{{0.2, 0.2, 5.0}, {-1.0, -1.0, -3.0}};
  const Attribution a = shapley_attribution(f, {1.5, 1.5, 9.0}, bg, singletons(3));
  EXPECT_NEAR(a.phi[0], a.phi[1], 1e-12);
  EXPECT_NEAR(a.phi[2], 0.0, 1e-9);
}

TEST(Shapley, DetectorDummyGroupWithZeroWeights) {
  DetectorModel m = make_detector(20, 5);
  const FeatureGroups g = metric_groups(4);
  // silence the qps group in the first layer
  const Tensor& w0 = m.params.at(weight_name(0));
  std::vector<double> v(w0.values().begin(), w0.values().end());
  for (std::size_t r = 0; r < w0.rows(); ++r)
    for (std::size_t c : g.members[4]) v[r * w0.cols() + c] = 0.0;
  m.params[weight_name(0)] = Tensor(w0.shape(), v);
  Rng rng(6);
  const auto bg = random_rows(6, 20, rng);
  const auto x = random_rows(1, 20, rng)[0];
  const Attribution a = shapley_attribution(m, x, bg, g);
  EXPECT_NEAR(a.phi[4], 0.0, 1e-9);
  EXPECT_NEAR(std::accumulate(a.phi.begin(), a.phi.end(), a.baseValue), a.instanceValue, 1e-9);
  EXPECT_NEAR(a.instanceValue, detect(m, x).score, 1e-15);
}

TEST(Shapley, CapacityAndInputErrors) {
  const BatchModel f = linear_model(std::vector<double>(13, 1.0), 0.0);
  const std::vector<std::vector<double>> bg{std::vector<double>(13, 0.0)};
  try {
    shapley_attribution(f, std::vector<double>(13, 1.0), bg, singletons(13));
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("group"), std::string::npos);
  }
  const BatchModel f12 = linear_model(std::vector<double>(12, 1.0), 0.0);
  EXPECT_NO_THROW(shapley_attribution(f12, std::vector<double>(12, 1.0), {std::vector<double>(12, 0.0)},
                                      singletons(12)));
  EXPECT_THROW(shapley_attribution(f12, std::vector<double>(12, 1.0), {}, singletons(12)), InputError);
  EXPECT_THROW(shapley_attribution(f12, std::vector<double>(11, 1.0), {std::vector<double>(12, 0.0)},
                                   singletons(12)),
               InputError);
}

TEST(Groups, MetricPartition) {
  const FeatureGroups g = metric_groups(4);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.members[2], (std::vector<std::size_t>{2, 7, 12, 17}));
  EXPECT_EQ(g.names[0], "cpu");
  EXPECT_NO_THROW(validate_partition(g, 20));
  EXPECT_THROW(validate_partition(g, 21), InputError);
  FeatureGroups overlap{{{0, 1}, {1}}, {"a", "b"}};
  EXPECT_THROW(validate_partition(overlap, 2), InputError);
}

TEST(TopGroup, LargestWithLowestIndexOnTies) {
  Attribution a;
  a.phi = {0.1, 0.4, 0.4, -1.0};
  EXPECT_EQ(top_group(a), 1u);
}

TEST(ExplainRecovery, HandRankingAndGaps) {
  Policy p;
  const SystemState s{LoadLevel::low, AnomalyStatus::cascade, FailedBin::half};
  const double q[] = {5, 3, 1, -1, 0, 2, 4};
  for (std::size_t a = 0; a < kActionCount; ++a) p.value(s, action_from_ordinal(a)) = q[a];
  const auto r = explain_recovery(p, s);
  ASSERT_EQ(r.size(), kActionCount);
  const std::vector<double> gaps{0, 1, 2, 3, 4, 5, 6};
  const std::vector<std::size_t> order{0, 6, 1, 5, 2, 4, 3};
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(static_cast<std::size_t>(r[i].action), order[i]);
    EXPECT_EQ(r[i].gap, gaps[i]);
  }
}

TEST(ExplainRecovery, EqualValuesKeepOrdinalOrder) {
  const auto r = explain_recovery(Policy{}, SystemState{});
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(static_cast<std::size_t>(r[i].action), i);
    EXPECT_EQ(r[i].gap, 0.0);
  }
}

TEST(ExplainRecovery, PermutationWithNonNegativeGaps) {
  Rng rng(9);
  Policy p;
  for (double& v : p.q) v = std::round(rng.normal() * 3);
  for (std::size_t si = 0; si < kStateCount; ++si) {
    const auto r = explain_recovery(p, SystemState::from_index(si));
    EXPECT_EQ(r.front().gap, 0.0);
    EXPECT_EQ(r.front().action, p.greedy(SystemState::from_index(si)));
    std::vector<bool> seen(kActionCount, false);
    for (std::size_t i = 0; i < r.size(); ++i) {
      seen[static_cast<std::size_t>(r[i].action)] = true;
      EXPECT_GE(r[i].gap, 0.0);
      if (i > 0) EXPECT_GE(r[i - 1].q, r[i].q);
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
}

}  // namespace
}  // namespace selfheal
