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
#include <vector>

#include <gtest/gtest.h>

#include "ccagnn/ccagnn.hpp"
#include "ccagnn/gradcheck_suites.hpp"
#include "test_util.hpp"

namespace ccagnn {
namespace {

using test::random_tensor;
using test::to_vec;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensor i2 = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(to_vec(matmul(i2, m)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, RowTimesColumn) {
  Tensor c = matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c.item(), 11.0);
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  Tensor a = random_tensor({3, 4}, 1, true);
  Tensor b = random_tensor({4, 2}, 2, true);
  auto report = grad_check([&] { return sum(matmul(a, b)); }, {{"a", a}}, 1e-4, 1e-5);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  // d sum(AB) / dA[i,k] = sum_j B[k,j]
  Tape tape;
  {
    Tape::Scope scope(tape);
    a.zero_grad();
    Tensor l = sum(matmul(a, b));
    tape.backward(l);
  }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(a.grad()[i * 4 + k], b.at(k, 0) + b.at(k, 1), 1e-12);
}

TEST(Elementwise, ScalarValues) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor::scalar(-1.0), 0.2).item(), -0.2);
  EXPECT_NEAR(sigmoid(Tensor::scalar(2.0)).item(), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(sigmoid(Tensor::scalar(2.0)).item(), 0.880797, 5e-7);
  EXPECT_NEAR(elu(Tensor::scalar(-1.0)).item(), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(tanh(Tensor::scalar(0.5)).item(), std::tanh(0.5), 1e-15);
  EXPECT_NEAR(exp(Tensor::scalar(1.0)).item(), std::exp(1.0), 1e-15);
}

TEST(Elementwise, LogOfNonPositiveIsDomainError) {
  EXPECT_THROW(log(Tensor::from({2}, {1.0, 0.0})), DomainError);
  EXPECT_THROW(log(Tensor::from({1}, {-3.0})), DomainError);
  EXPECT_NO_THROW(log(Tensor::from({1}, {1e-300})));
}

TEST(SegmentSoftmax, SingleElementIsOne) {
  std::vector<std::size_t> seg = {0};
  EXPECT_EQ(segment_softmax(Tensor::from({1}, {42.0}), seg).item(), 1.0);
}

TEST(SegmentSoftmax, EqualScoresSplitEvenly) {
  std::vector<std::size_t> seg = {3, 3};
  EXPECT_EQ(to_vec(segment_softmax(Tensor::from({2}, {-7.0, -7.0}), seg)), (std::vector<double>{0.5, 0.5}));
}

TEST(SegmentSoftmax, MatchesScalarOracle) {
  std::vector<std::size_t> seg = {0, 0, 0};
  auto out = to_vec(segment_softmax(Tensor::from({3}, {1, 2, 3}), seg));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(out[k], std::exp(k + 1.0) / z, 1e-15);
  EXPECT_NEAR(out[0], 0.09003, 5e-6);
  EXPECT_NEAR(out[1], 0.24473, 5e-6);
  EXPECT_NEAR(out[2], 0.66524, 5e-6);
}

TEST(SegmentSoftmax, LargeScoresStayFinite) {
  std::vector<std::size_t> seg = {0, 0};
  auto out = to_vec(segment_softmax(Tensor::from({2}, {1000.0, 1000.0}), seg));
  EXPECT_EQ(out, (std::vector<double>{0.5, 0.5}));
}

TEST(SegmentSoftmax, UnsortedSegmentsAreStructureError) {
  std::vector<std::size_t> seg = {1, 0};
  EXPECT_THROW(segment_softmax(Tensor::from({2}, {1, 2}), seg), StructureError);
}

TEST(SegmentSoftmax, SumsToOnePerSegmentAndHead) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<std::size_t> seg;
    const std::size_t segments = 1 + rng() % 8;
    for (std::size_t s = 0; s < segments; ++s)
      for (std::size_t k = 0, len = 1 + rng() % 5; k < len; ++k) seg.push_back(s);
    Tensor scores = random_tensor({seg.size(), 3}, seed);
    for (double& v : scores.values()) v *= 20.0;
    Tensor out = segment_softmax(scores, seg);
    for (std::size_t s = 0; s < segments; ++s) {
      for (std::size_t h = 0; h < 3; ++h) {
        double total = 0.0;
        for (std::size_t r = 0; r < seg.size(); ++r)
          if (seg[r] == s) total += out.at(r, h);
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
    }
  }
}

TEST(SegmentSum, EmptyEdgeSetGivesZeros) {
  Tensor out = segment_sum(Tensor::zeros({0, 2}), std::vector<std::size_t>{}, 3);
  EXPECT_EQ(out.shape(), (Shape{3, 2}));
  EXPECT_EQ(to_vec(out), std::vector<double>(6, 0.0));
}

TEST(SegmentSum, HandSum) {
  std::vector<std::size_t> seg = {0, 0, 1};
  Tensor out = segment_sum(Tensor::from({3, 1}, {1, 2, 3}), seg, 2);
  EXPECT_EQ(to_vec(out), (std::vector<double>{3, 3}));
}

TEST(SegmentSum, OutOfRangeIsStructureError) {
  std::vector<std::size_t> seg = {0, 2};
  EXPECT_THROW(segment_sum(Tensor::from({2, 1}, {1, 2}), seg, 2), StructureError);
}

TEST(SegmentSum, GradientMatchesFiniteDifferences) {
  Tensor v = random_tensor({6, 3}, 5, true);
  std::vector<std::size_t> seg = {2, 0, 1, 0, 3, 2};
  Tensor r = random_tensor({4, 3}, 6);
  auto report = grad_check([&] { return sum(mul(segment_sum(v, seg, 4), r)); }, {{"values", v}}, 1e-4, 1e-5);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Backward, SumGivesOnes) {
  Tensor x = random_tensor({2, 3}, 9, true);
  Tape tape;
  Tape::Scope scope(tape);
  tape.backward(sum(x));
  EXPECT_EQ(to_vec(Tensor::from({6}, {x.grad().begin(), x.grad().end()})), std::vector<double>(6, 1.0));
}

TEST(Backward, SquareGivesTwiceX) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  Tape::Scope scope(tape);
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4}));
}

TEST(Backward, SharedSubexpressionAccumulatesBothPaths) {
  // y = x * x; loss = sum(3y + y^2) = sum(3x^2 + x^4); d/dx = 6x + 4x^3.
  Tensor x = Tensor::from({2}, {0.5, -1.5}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = mul(x, x);
  tape.backward(sum(add(scale(y, 3.0), mul(y, y))));
  for (std::size_t i = 0; i < 2; ++i) {
    const double v = x.values()[i];
    EXPECT_NEAR(x.grad()[i], 6 * v + 4 * v * v * v, 1e-12);
  }
}

TEST(Backward, RepeatedCallsAccumulateLeafGradients) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor l = sum(scale(x, 2.0));
  tape.backward(l);
  tape.backward(l);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{4, 4}));
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor x = random_tensor({2, 2}, 3, true);
  Tape tape;
  Tape::Scope scope(tape);
  EXPECT_THROW(tape.backward(scale(x, 2.0)), ContractError);
}

TEST(Tape, RecordsInTopologicalOrder) {
  Tensor a = random_tensor({3, 3}, 1, true);
  Tensor b = random_tensor({3, 3}, 2, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor l = sum(sigmoid(add(matmul(a, b), a)));
  ASSERT_EQ(tape.size(), 4u);
  std::vector<std::uint64_t> produced = {a.id(), b.id()};
  for (const auto& r : tape.records()) {
    for (auto in : r.inputs) EXPECT_NE(std::find(produced.begin(), produced.end(), in), produced.end());
    produced.push_back(r.output);
  }
  EXPECT_EQ(tape.records().back().output, l.id());
}

TEST(Tape, InferenceRecordsNothingAndMatchesBitwise) {
  Graph g = random_graph(12, 5, 3, 0.3, 4);
  ModelConfig mc;
  mc.in_dim = 5;
  mc.num_classes = 3;
  mc.heads = 2;
  mc.head_dim = 4;
  mc.mi.proj_dim = 16;
  mc.mi.hidden = 8;
  CCAGNNModel model(mc, 3);
  Tape tape;
  ForwardOutput recorded;
  {
    Tape::Scope scope(tape);
    recorded = model.forward(g, AugmentationConfig::none(), false, 5);
  }
  EXPECT_GT(tape.size(), 0u);
  Tape other;
  ForwardOutput inferred;
  {
    Tape::Scope scope(other);
    Tape::NoGrad ng;
    inferred = model.forward(g, AugmentationConfig::none(), false, 5);
  }
  EXPECT_EQ(other.size(), 0u);
  for (auto [x, y] : {std::pair{recorded.fusion_logits, inferred.fusion_logits},
                      std::pair{recorded.causal_logits, inferred.causal_logits},
                      std::pair{recorded.intervention_logits, inferred.intervention_logits}}) {
    EXPECT_EQ(to_vec(x), to_vec(y));
  }
}

TEST(GradCheck, IdentityHasZeroError) {
  Tensor x = random_tensor({3, 2}, 8, true);
  Tensor r = random_tensor({3, 2}, 9);
  auto report = grad_check([&] { return sum(mul(x, r)); }, {{"x", x}});
  EXPECT_LT(report.max_rel_error, 1e-9);
  EXPECT_TRUE(report.passed);
}

TEST(GradCheck, SigmoidMatmulChain) {
  Tensor a = random_tensor({4, 3}, 11, true);
  Tensor b = random_tensor({3, 2}, 12, true);
  auto report = grad_check([&] { return sum(sigmoid(matmul(a, b))); }, {{"a", a}, {"b", b}}, 1e-4, 1e-5);
  EXPECT_TRUE(report.passed) << report.worst << " " << report.max_rel_error;
  EXPECT_EQ(report.entries.size(), 2u);
}

TEST(GradCheck, ZeroToleranceFails) {
  Tensor a = random_tensor({2, 2}, 1, true);
  auto report = grad_check([&] { return sum(exp(a)); }, {{"a", a}}, 1e-4, 0.0);
  EXPECT_FALSE(report.passed);
}

TEST(GradCheck, PrimitivesPassOverHundredSeeds) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto r = run_gradcheck_suite("primitives", 1e-4, 1e-4, seed);
    EXPECT_TRUE(r.passed) << "seed " << seed << ": " << r.worst << " " << r.max_rel_error;
    worst = std::max(worst, r.max_rel_error);
  }
  RecordProperty("worst_rel_error", std::to_string(worst));
}

TEST(GradCheck, LayerAndModelSuitesPass) {
  for (const char* suite : {"layers", "model"}) {
    auto r = run_gradcheck_suite(suite);
    EXPECT_TRUE(r.passed) << suite << ": " << r.worst << " " << r.max_rel_error;
  }
  EXPECT_THROW(run_gradcheck_suite("nope"), std::invalid_argument);
}

TEST(FusedOps, EdgeScoresEqualComposition) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph g = random_graph(9, 2, 2, 0.3, seed);
    const auto& csr = g.csr();
    Tensor x = random_tensor({9, 6}, seed + 100, true);
    Tensor a = random_tensor({1, 6}, seed + 200, true);
    Tensor fused = edge_scores(x, a, csr.sources, csr.targets, 3, 0.2);
    Tensor plain =
        head_dot(leaky_relu(add(gather_rows(x, csr.targets), gather_rows(x, csr.sources)), 0.2), a, 3);
    auto fv = to_vec(fused), pv = to_vec(plain);
    ASSERT_EQ(fv.size(), pv.size());
    for (std::size_t i = 0; i < fv.size(); ++i) EXPECT_NEAR(fv[i], pv[i], 1e-13);

    Tensor alpha = segment_softmax(plain, csr.targets);
    Tensor agg = edge_aggregate(x, alpha, csr.sources, csr.targets, 9);
    Tensor ref = segment_sum(head_scale(gather_rows(x, csr.sources), alpha), csr.targets, 9);
    auto av = to_vec(agg), rv = to_vec(ref);
    for (std::size_t i = 0; i < av.size(); ++i) EXPECT_NEAR(av[i], rv[i], 1e-13);
  }
}

TEST(FusedOps, RejectBadEndpoints) {
  Tensor x = random_tensor({3, 4}, 1);
  Tensor a = random_tensor({1, 4}, 2);
  std::vector<std::size_t> src = {0, 5}, dst = {0, 1};
  EXPECT_THROW(edge_scores(x, a, src, dst, 2, 0.2), StructureError);
  EXPECT_THROW(edge_scores(x, random_tensor({1, 3}, 2), std::vector<std::size_t>{0}, std::vector<std::size_t>{0}, 2,
                           0.2),
               DimensionError);
}

TEST(Tensor, ShapeInvariants) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  Tensor t = Tensor::zeros({2, 3}, true);
  t.zero_grad();
  EXPECT_EQ(t.grad().size(), t.size());
  EXPECT_THROW(Tensor::zeros({2}).item(), ContractError);
}

}  // namespace
}  // namespace ccagnn
