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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ccagnn/grad_check.hpp"
#include "ccagnn/layers/gat.hpp"
#include "ccagnn/layers/gate.hpp"
#include "ccagnn/layers/mi.hpp"
#include "ccagnn/loss.hpp"
#include "ccagnn/model.hpp"
#include "ccagnn/ops.hpp"
#include "ccagnn/synthetic.hpp"

namespace ccagnn {

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

struct SuiteResult {
  std::string suite;
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
  /// "case/parameter" with the largest error.
  std::string worst;
  bool passed = true;
};

inline const std::vector<std::string>& gradcheck_suite_names() {
  static const std::vector<std::string> names = {"primitives", "layers", "model"};
  return names;
}

namespace detail {

class SuiteBuilder {
 public:
  SuiteBuilder(std::string suite, double step, double tolerance) : step_(step), tolerance_(tolerance) {
    result_.suite = std::move(suite);
  }

  void run(const std::string& name, ParameterList params, const std::function<Tensor()>& loss) {
    GradCheckCase c{name, grad_check(loss, std::move(params), step_, tolerance_)};
    if (result_.cases.empty() || c.report.max_rel_error > result_.max_rel_error) {
      result_.max_rel_error = c.report.max_rel_error;
      result_.worst = name + "/" + c.report.worst;
    }
    result_.passed = result_.passed && c.report.passed;
    result_.cases.push_back(std::move(c));
  }

  SuiteResult finish() { return std::move(result_); }

 private:
  double step_, tolerance_;
  SuiteResult result_;
};

/// Gaussian tensor whose entries keep at least `margin` away from zero, so
/// finite differences never straddle a kink at the origin.
inline Tensor leaf(Shape shape, Rng& rng, double margin = 0.05, bool positive = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) {
    do {
      x = normal(rng);
    } while (std::abs(x) < margin);
    if (positive) x = std::abs(x) + 0.1;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

/// Scalar probe sum(y * r) with a fixed random r so every output element gets
/// a distinct upstream gradient.
inline Tensor probe(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> r(y.size());
  for (double& x : r) x = normal(rng);
  return sum(mul(y, Tensor::from(y.shape(), std::move(r))));
}

inline SuiteResult primitives_suite(double step, double tol, std::uint64_t seed) {
  SuiteBuilder b("primitives", step, tol);
  Rng rng(derive_seed(seed, 0x7072696d));
  auto unary = [&](const std::string& name, const std::function<Tensor(const Tensor&)>& f, bool positive = false) {
    Tensor x = leaf({3, 4}, rng, 0.05, positive);
    const std::uint64_t s = rng();
    b.run(name, {{"x", x}}, [=] { return probe(f(x), s); });
  };
  auto binary = [&](const std::string& name, Shape sa, Shape sb,
                    const std::function<Tensor(const Tensor&, const Tensor&)>& f) {
    Tensor x = leaf(sa, rng), y = leaf(sb, rng);
    const std::uint64_t s = rng();
    b.run(name, {{"a", x}, {"b", y}}, [=] { return probe(f(x, y), s); });
  };

  binary("matmul", {3, 4}, {4, 2}, [](const Tensor& a, const Tensor& c) { return matmul(a, c); });
  unary("transpose", [](const Tensor& a) { return transpose(a); });
  binary("add", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& c) { return add(a, c); });
  binary("sub", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& c) { return sub(a, c); });
  binary("mul", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& c) { return mul(a, c); });
  binary("add_row", {3, 4}, {1, 4}, [](const Tensor& a, const Tensor& c) { return add_row(a, c); });
  binary("mul_col", {3, 4}, {3, 1}, [](const Tensor& a, const Tensor& c) { return mul_col(a, c); });
  binary("concat_cols", {3, 2}, {3, 3}, [](const Tensor& a, const Tensor& c) { return concat_cols(a, c); });
  unary("scale", [](const Tensor& a) { return scale(a, -1.7); });
  unary("shift", [](const Tensor& a) { return shift(a, 0.3); });
  unary("apply_mask", [](const Tensor& a) {
    std::vector<double> m(a.size(), 1.0);
    for (std::size_t i = 0; i < m.size(); i += 3) m[i] = 0.0;
    return apply_mask(a, m);
  });
  unary("sigmoid", [](const Tensor& a) { return sigmoid(a); });
  unary("exp", [](const Tensor& a) { return exp(a); });
  unary("log", [](const Tensor& a) { return log(a); }, true);
  unary("elu", [](const Tensor& a) { return elu(a); });
  unary("leaky_relu", [](const Tensor& a) { return leaky_relu(a, 0.2); });
  unary("tanh", [](const Tensor& a) { return tanh(a); });
  unary("softplus", [](const Tensor& a) { return softplus(a); });
  unary("square", [](const Tensor& a) { return square(a); });
  unary("sqrt", [](const Tensor& a) { return sqrt(a); }, true);
  unary("sum", [](const Tensor& a) { return sum(a); });
  unary("mean", [](const Tensor& a) { return mean(a); });
  unary("row_sum", [](const Tensor& a) { return row_sum(a); });
  unary("log_softmax", [](const Tensor& a) { return log_softmax(a); });
  unary("logsumexp_rows", [](const Tensor& a) { return logsumexp_rows(a); });
  unary("normalize_rows", [](const Tensor& a) { return normalize_rows(a); });
  unary("slice_cols", [](const Tensor& a) { return slice_cols(a, 1, 3); });
  unary("gather_rows", [](const Tensor& a) {
    const std::vector<std::size_t> idx = {2, 0, 2, 1};
    return gather_rows(a, idx);
  });
  unary("pick", [](const Tensor& a) {
    const std::vector<std::size_t> r = {0, 2, 2}, c = {1, 3, 0};
    return pick(a, r, c);
  });
  unary("segment_sum", [](const Tensor& a) {
    const std::vector<std::size_t> seg = {1, 0, 1};
    return segment_sum(a, seg, 2);
  });
  {
    Tensor s = leaf({5, 2}, rng);
    const std::vector<std::size_t> seg = {0, 0, 1, 1, 1};
    const std::uint64_t ps = rng();
    b.run("segment_softmax", {{"scores", s}}, [=] { return probe(segment_softmax(s, seg), ps); });
  }
  binary("head_dot", {3, 4}, {1, 4}, [](const Tensor& a, const Tensor& c) { return head_dot(a, c, 2); });
  binary("head_scale", {3, 4}, {3, 2}, [](const Tensor& a, const Tensor& c) { return head_scale(a, c); });
  unary("head_mean", [](const Tensor& a) { return head_mean(a, 2); });
  {
    Tensor x = leaf({4, 6}, rng), a = leaf({1, 6}, rng);
    const std::vector<std::size_t> src = {0, 1, 2, 3, 1, 3}, dst = {0, 0, 1, 2, 3, 3};
    const std::uint64_t ps = rng();
    b.run("edge_scores", {{"x", x}, {"attention", a}},
          [=] { return probe(edge_scores(x, a, src, dst, 2, 0.2), ps); });
    Tensor w = leaf({6, 2}, rng);
    const std::uint64_t pa = rng();
    b.run("edge_aggregate", {{"x", x}, {"alpha", w}},
          [=] { return probe(edge_aggregate(x, w, src, dst, 4), pa); });
  }
  {
    Tensor z = leaf({4, 3}, rng);
    const std::vector<std::size_t> rows = {0, 1, 3}, targets = {2, 0, 1};
    b.run("cross_entropy", {{"logits", z}}, [=] { return cross_entropy(z, rows, targets); });
  }
  return b.finish();
}

inline SuiteResult layers_suite(double step, double tol, std::uint64_t seed) {
  SuiteBuilder b("layers", step, tol);
  Rng rng(derive_seed(seed, 0x6c617972));
  const Graph g = random_graph(7, 5, 3, 0.35, derive_seed(seed, 0x67726170));
  const Tensor x = g.feature_tensor(false);

  for (AttentionScoring scoring : {AttentionScoring::gatv2, AttentionScoring::gat}) {
    for (bool concat : {true, false}) {
      GATConfig cfg;
      cfg.in_dim = 5;
      cfg.out_dim = 3;
      cfg.heads = 2;
      cfg.concat = concat;
      cfg.scoring = scoring;
      GATLayer layer(cfg, rng);
      ParameterList params;
      layer.register_parameters(params, "gat");
      const std::uint64_t ps = rng();
      const std::string name = std::string(scoring == AttentionScoring::gatv2 ? "gatv2" : "gat") +
                               (concat ? "_concat" : "_mean");
      b.run(name, params, [=, &g] { return probe(layer.forward(x, g).h, ps); });
    }
  }
  {
    Linear lin(5, 3, rng);
    ParameterList params;
    lin.register_parameters(params, "linear");
    const std::uint64_t ps = rng();
    b.run("linear", params, [=] { return probe(lin(x), ps); });
  }
  const Tensor h = leaf({6, 4}, rng);
  {
    FeatureGate gate(4, rng);
    ParameterList params;
    gate.register_parameters(params, "gate");
    params.push_back({"h", h});
    const std::uint64_t ps = rng(), po = rng();
    b.run("feature_gate", params, [=] {
      auto rep = gate.disentangle(h);
      return add(probe(rep.causal, ps), probe(rep.noncausal, po));
    });
  }
  const Tensor xc = leaf({6, 4}, rng), xo = leaf({6, 4}, rng);
  {
    FusionGate fusion(4, rng);
    ParameterList params;
    fusion.register_parameters(params, "fusion");
    params.push_back({"x_c", xc});
    params.push_back({"x_o", xo});
    const std::uint64_t ps = rng();
    b.run("fusion_gate", params, [=] { return probe(fusion(xc, xo).fused, ps); });
  }
  b.run("orthogonality", {{"x_c", xc}, {"x_o", xo}}, [=] { return orthogonality_loss(xc, xo); });
  {
    const Tensor alpha = leaf({1, 1}, rng);
    const std::vector<std::size_t> perm = {3, 0, 5, 1, 2, 4};
    const std::uint64_t ps = rng();
    b.run("counterfactual_mix", {{"x_c", xc}, {"x_o", xo}, {"alpha", alpha}},
          [=] { return probe(counterfactual_mix(xc, xo, perm, sigmoid(alpha)), ps); });
  }
  {
    ProjectionHead head(4, 5, 6, rng);
    ParameterList params;
    head.register_parameters(params, "head");
    const std::uint64_t ps = rng();
    b.run("projection_head", params, [=] { return probe(head(h), ps); });
  }
  {
    const Tensor u = leaf({6, 5}, rng), v = leaf({6, 5}, rng), q = leaf({4, 5}, rng);
    b.run("contrastive_mi", {{"u", u}, {"v", v}}, [=] { return contrastive_mi(u, v, q.detach(), 0.5); });
  }
  {
    MIConfig mc;
    mc.hidden = 5;
    mc.proj_dim = 6;
    mc.temperature = 0.5;
    mc.queue_capacity = 8;
    mc.class_queue_capacity = 4;
    MIEstimator est(4, 3, mc, rng);
    const std::vector<std::size_t> classes = {0, 1, 2, 0, 1, 2};
    {
      Tape::NoGrad ng;
      est.warm_start(xc, classes);
    }
    ParameterList params;
    est.register_parameters(params, "mi");
    params.push_back({"x_c", xc});
    params.push_back({"x_o", xo});
    b.run("mi_loss", params, [=, &est] { return est.mi_loss(xc, xo, false); });
    b.run("conditional_mi_loss", params, [=, &est] { return est.conditional_mi_loss(xc, xo, classes, false).loss; });
    b.run("in_batch_mi_loss", params, [=, &est] { return est.in_batch_mi_loss(xc, xo); });
  }
  {
    const Tensor z = leaf({6, 4}, rng);
    const std::vector<std::size_t> labels = {0, 1, 0, 2, 1, 0};
    b.run("supervised_contrastive", {{"z", z}}, [=] { return detail::supervised_contrastive(z, labels, 0.5); });
  }
  return b.finish();
}

/// Full objective of a small model on a 10-node random graph with every node
/// labelled. One state-updating warm-up call fills queues and centers, after
/// which the loss is a pure function of the parameters.
inline SuiteResult model_suite(double step, double tol, std::uint64_t seed) {
  SuiteBuilder b("model", step, tol);
  const Graph g = random_graph(10, 6, 3, 0.3, derive_seed(seed, 0x6d6f646c));
  ModelConfig mc;
  mc.in_dim = 6;
  mc.num_classes = 3;
  mc.heads = 2;
  mc.head_dim = 3;
  mc.mi.hidden = 8;
  mc.mi.proj_dim = 16;
  mc.mi.temperature = 0.5;
  mc.mi.queue_capacity = 16;
  mc.mi.class_queue_capacity = 8;
  mc.contrastive_temperature = 0.5;
  auto model = std::make_shared<CCAGNNModel>(mc, derive_seed(seed, 0x696e6974));
  std::vector<std::size_t> train(g.num_nodes());
  for (std::size_t i = 0; i < train.size(); ++i) train[i] = i;
  const LossWeights weights;
  // Noise magnitudes follow the detached attention, so perturbing encoder
  // weights would move them; the noise path is a constant shift and is left out.
  AugmentationConfig aug;
  aug.noise = false;
  aug.mask_rate = 0.2;
  aug.edge_drop_rate = 0.1;
  aug.edge_add_rate = 0.1;
  const std::uint64_t step_seed = derive_seed(seed, 0x73746570);
  auto loss = [model, &g, train, weights, aug, step_seed](bool update) {
    ForwardOutput out = model->forward(g, aug, true, step_seed);
    LossTargets targets{g.labels(), train, 0.5, derive_seed(step_seed, 0x6d69), update};
    return total_loss(*model, out, targets, weights).total;
  };
  {
    Tape tape;
    Tape::Scope scope(tape);
    loss(true);
  }
  b.run("ccagnn_total", model->parameters(), [&] { return loss(false); });

  ModelConfig bc = mc;
  bc.baseline = true;
  auto baseline = std::make_shared<CCAGNNModel>(bc, derive_seed(seed, 0x62617365));
  b.run("baseline_total", baseline->parameters(), [baseline, &g, train] {
    ForwardOutput out = baseline->forward(g, AugmentationConfig::none(), true, 0);
    LossTargets targets{g.labels(), train, 0.5, 0, false};
    return total_loss(*baseline, out, targets, LossWeights::fusion_only()).total;
  });
  return b.finish();
}

}  // namespace detail

/// Runs one named suite ("primitives", "layers" or "model").
inline SuiteResult run_gradcheck_suite(const std::string& name, double step = 1e-4, double tolerance = 1e-4,
                                       std::uint64_t seed = 0) {
  if (name == "primitives") return detail::primitives_suite(step, tolerance, seed);
  if (name == "layers") return detail::layers_suite(step, tolerance, seed);
  if (name == "model") return detail::model_suite(step, tolerance, seed);
  throw std::invalid_argument("unknown gradcheck suite '" + name + "' (expected primitives, layers, model or all)");
}

}  // namespace ccagnn
