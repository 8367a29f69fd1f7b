/*
 * Copyright 2026 The ccagnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ccagnn/ccagnn.hpp"
#include "test_util.hpp"

namespace ccagnn {
namespace {

using test::random_tensor;
using test::to_vec;

Graph ring(std::size_t n) {
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::uint32_t>((i + 1) % n);
    edges.push_back({i, j});
    edges.push_back({j, i});
  }
  return add_self_loops(Graph("ring", n, 1, 2, std::vector<double>(n, 0.0), edges, std::vector<std::size_t>(n, 0)));
}

Graph undirected(std::size_t n, std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::vector<Edge> edges;
  while (seen.size() < pairs) {
    auto a = pick(rng), b = pick(rng);
    if (a == b || !seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
    edges.push_back({a, b});
    edges.push_back({b, a});
  }
  return Graph("u", n, 1, 2, std::vector<double>(n, 0.0), edges, std::vector<std::size_t>(n, 0));
}

TEST(AugmentNoise, ZeroScaleIsIdentity) {
  Tensor h = random_tensor({5, 3}, 1);
  std::vector<double> imp(5, 0.7);
  EXPECT_EQ(to_vec(augment_noise(h, imp, 0.0, 3)), to_vec(h));
}

TEST(AugmentNoise, DeterministicGivenSeed) {
  Tensor h = random_tensor({5, 3}, 1);
  std::vector<double> imp = {0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_EQ(to_vec(augment_noise(h, imp, 0.1, 3)), to_vec(augment_noise(h, imp, 0.1, 3)));
  EXPECT_NE(to_vec(augment_noise(h, imp, 0.1, 3)), to_vec(augment_noise(h, imp, 0.1, 4)));
}

TEST(AugmentNoise, PerturbationScalesWithImportance) {
  Tensor h = Tensor::zeros({3, 4});
  std::vector<double> a = {1.0, 0.5, 0.0};
  Tensor out = augment_noise(h, a, 0.2, 9);
  // Same seed and unit importance recover eps itself.
  std::vector<double> ones(3, 1.0);
  Tensor eps = augment_noise(h, ones, 1.0, 9);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out.at(i, j), 0.2 * a[i] * eps.at(i, j), 1e-15);
}

TEST(AugmentNoise, UniformAttentionGivesEqualVariance) {
  const std::size_t k = 10, draws = 1000;
  Graph g = ring(k);
  // Every target has three incoming edges, so uniform attention is 1/3 everywhere.
  Tensor att = Tensor::full({g.num_edges(), 2}, 1.0 / 3.0);
  const auto imp = attention_importance(att, g.csr(), k);
  for (double v : imp) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Tensor h = Tensor::zeros({k, 1});
  std::vector<std::vector<double>> samples(k);
  for (std::size_t s = 0; s < draws; ++s) {
    Tensor out = augment_noise(h, imp, 0.1, derive_seed(123, s));
    for (std::size_t i = 0; i < k; ++i) samples[i].push_back(out.at(i, 0));
  }
  // Bartlett's test for homogeneity of variances; statistic ~ chi^2(k - 1).
  const double ni = static_cast<double>(draws), kk = static_cast<double>(k), N = ni * kk;
  double pooled = 0.0, log_sum = 0.0;
  for (const auto& x : samples) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= ni;
    double s2 = 0.0;
    for (double v : x) s2 += (v - m) * (v - m);
    s2 /= ni - 1.0;
    pooled += (ni - 1.0) * s2;
    log_sum += (ni - 1.0) * std::log(s2);
  }
  pooled /= N - kk;
  const double stat = ((N - kk) * std::log(pooled) - log_sum) /
                      (1.0 + (kk / (ni - 1.0) - 1.0 / (N - kk)) / (3.0 * (kk - 1.0)));
  RecordProperty("bartlett", std::to_string(stat));
  EXPECT_LT(stat, 21.666);  // 99% quantile of chi^2 with 9 degrees of freedom
}

TEST(AttentionImportance, MeanOverOutgoingEdgesIncludingSelfLoop) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph g = random_graph(12, 2, 2, 0.2, seed);
    Tensor att = random_tensor({g.num_edges(), 3}, seed + 1);
    const auto imp = attention_importance(att, g.csr(), 12);
    const auto& csr = g.csr();
    for (std::size_t i = 0; i < 12; ++i) {
      double s = 0.0, c = 0.0;
      for (std::size_t r = 0; r < csr.num_edges(); ++r) {
        if (csr.sources[r] != i) continue;
        for (std::size_t h = 0; h < 3; ++h) s += att.at(r, h), c += 1;
      }
      EXPECT_NEAR(imp[i], s / c, 1e-14);
    }
  }
}

TEST(AttentionImportance, IsolatedNodeKeepsSelfAttention) {
  // Node 3 has only its self-loop, so it attends to itself with weight 1.
  Graph g = add_self_loops(
      Graph("iso", 4, 2, 2, test::gaussian(8, 1), {{0, 1}, {1, 0}, {1, 2}, {2, 1}}, {0, 1, 0, 1}));
  GATConfig c;
  c.in_dim = 2;
  c.out_dim = 3;
  c.heads = 2;
  Rng rng(4);
  GATLayer layer(c, rng);
  auto out = layer.forward(g.feature_tensor(), g);
  const auto imp = attention_importance(out.attention, g.csr(), 4);
  EXPECT_NEAR(imp[3], 1.0, 1e-15);
  Tensor h = Tensor::zeros({4, 3});
  Tensor noisy = augment_noise(h, imp, 0.1, 5);
  double moved = 0.0;
  for (std::size_t j = 0; j < 3; ++j) moved += std::abs(noisy.at(3, j));
  EXPECT_GT(moved, 0.0);
}

TEST(AugmentMask, ZeroRateIsIdentity) {
  Tensor h = random_tensor({4, 4}, 1);
  EXPECT_EQ(to_vec(augment_mask(h, {}, 0.0, 1)), to_vec(h));
}

TEST(AugmentMask, FullRateAndImportanceZeroesEverything) {
  Tensor h = random_tensor({4, 4}, 1);
  std::vector<double> imp(16, 1.0);
  EXPECT_EQ(to_vec(augment_mask(h, imp, 1.0, 1)), std::vector<double>(16, 0.0));
}

TEST(AugmentMask, HalfRateZeroFraction) {
  Tensor h = Tensor::full({100, 100}, 1.0);
  Tensor out = augment_mask(h, {}, 0.5, 77);
  std::size_t zeros = 0;
  for (double v : out.values()) zeros += v == 0.0;
  const double frac = static_cast<double>(zeros) / 1e4;
  RecordProperty("zero_fraction", std::to_string(frac));
  EXPECT_GE(frac, 0.45);
  EXPECT_LE(frac, 0.55);
}

TEST(AugmentMask, ZeroImportanceProtectsEntries) {
  Tensor h = Tensor::full({1, 4}, 2.0);
  std::vector<double> imp = {0.0, 1.0, 0.0, 1.0};
  for (std::uint64_t s = 0; s < 50; ++s) {
    Tensor out = augment_mask(h, imp, 1.0, s);
    EXPECT_EQ(to_vec(out), (std::vector<double>{2.0, 0.0, 2.0, 0.0}));
  }
}

TEST(AugmentMask, DeterministicGivenSeed) {
  Tensor h = random_tensor({8, 8}, 2);
  EXPECT_EQ(to_vec(augment_mask(h, {}, 0.3, 5)), to_vec(augment_mask(h, {}, 0.3, 5)));
}

TEST(NormalizeImportance, RowMaxScaling) {
  std::vector<double> grad = {-2, 1, 0, 0, 0, 0};
  EXPECT_EQ(normalize_importance(grad, 2, 3), (std::vector<double>{1, 0.5, 0, 1, 1, 1}));
}

TEST(AugmentEdges, ZeroRatesKeepEdges) {
  Graph g = add_self_loops(undirected(50, 100, 1));
  EXPECT_EQ(augment_edges(g, 0.0, 0.0, 3).edges(), g.edges());
}

TEST(AugmentEdges, FullDropLeavesSelfLoops) {
  Graph g = add_self_loops(undirected(50, 100, 1));
  Graph out = augment_edges(g, 1.0, 0.0, 3);
  EXPECT_EQ(out.num_edges(), 50u);
  for (const Edge& e : out.edges()) EXPECT_EQ(e.src, e.dst);
  EXPECT_TRUE(out.has_self_loops());
}

TEST(AugmentEdges, DropCountOnCoraSizedGraph) {
  Graph g = add_self_loops(undirected(2708, 5278, 2));
  ASSERT_EQ(g.num_edges(), 10556u + 2708u);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph out = augment_edges(g, 0.1, 0.0, seed);
    const std::size_t dropped = g.num_edges() - out.num_edges();
    EXPECT_GE(dropped, 950u) << "seed " << seed;
    EXPECT_LE(dropped, 1160u) << "seed " << seed;
    EXPECT_TRUE(out.has_self_loops());
  }
}

TEST(AugmentEdges, AddedEdgesAreNewAndNotLoops) {
  Graph g = add_self_loops(undirected(200, 400, 3));
  Graph out = augment_edges(g, 0.0, 0.1, 4);
  ASSERT_EQ(out.num_edges(), g.num_edges() + 80);
  std::set<Edge> original(g.edges().begin(), g.edges().end());
  std::set<Edge> all;
  for (std::size_t r = 0; r < out.num_edges(); ++r) {
    const Edge& e = out.edges()[r];
    EXPECT_TRUE(all.insert(e).second) << "duplicate edge";
    if (r >= g.num_edges()) {
      EXPECT_NE(e.src, e.dst);
      EXPECT_EQ(original.count(e), 0u);
    }
  }
}

TEST(AugmentEdges, DeterministicAndValidated) {
  Graph g = add_self_loops(undirected(100, 200, 5));
  EXPECT_EQ(augment_edges(g, 0.2, 0.2, 6).edges(), augment_edges(g, 0.2, 0.2, 6).edges());
  EXPECT_THROW(augment_edges(g, 1.5, 0.0, 6), std::invalid_argument);
  AugmentationConfig bad;
  bad.mask_rate = -0.1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ccagnn
