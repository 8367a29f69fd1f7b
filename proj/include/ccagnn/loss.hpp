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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccagnn/model.hpp"

namespace ccagnn {

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& component, double value)
      : std::runtime_error("loss component '" + component + "' is not finite (" + std::to_string(value) + ")"),
        component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

inline constexpr std::array<const char*, 13> kLossComponents = {
    "ce_causal", "ce_fusion", "ce_intervention", "ce_noncausal", "mi", "cond_mi", "pred_mi",
    "inv_mi", "orth", "contrastive", "center", "gate_conf", "total"};

struct LossBundle {
  Tensor ce_causal, ce_fusion, ce_intervention, ce_noncausal_uniform;
  Tensor mi, cond_mi, pred_mi, inv_mi, orth;
  Tensor contrastive, center, gate_conf;
  Tensor total;
  /// Ramp multiplier applied to the intervention and MI weights this step.
  double adaptive = 1.0;
  std::vector<std::size_t> skipped_classes;

  /// Values in kLossComponents order.
  std::array<double, 13> values() const {
    return {ce_causal.item(), ce_fusion.item(), ce_intervention.item(), ce_noncausal_uniform.item(),
            mi.item(), cond_mi.item(), pred_mi.item(), inv_mi.item(), orth.item(),
            contrastive.item(), center.item(), gate_conf.item(), total.item()};
  }

  /// Weighted sum of the logged components, as total_loss forms it.
  static double weighted_sum(const std::array<double, 13>& v, const LossWeights& w, double adaptive) {
    return w.ce_causal * v[0] + w.ce_fusion * v[1] + adaptive * w.ce_intervention * v[2] + w.ce_noncausal * v[3] +
           adaptive * w.mi * v[4] + adaptive * w.cond_mi * v[5] + w.pred_mi * v[6] + w.inv_mi * v[7] +
           w.orth * v[8] + w.contrastive * v[9] + w.center * v[10] + w.gate_conf * v[11];
  }
};

/// What the loss may read about the labels. Only nodes in `train` are read
/// from `labels`; the other entries may hold anything.
struct LossTargets {
  std::span<const std::size_t> labels;
  std::span<const std::size_t> train;
  /// Training progress in [0, 1] driving the adaptive ramp.
  double progress = 1.0;
  /// Seeds the MI node sample.
  std::uint64_t batch_seed = 0;
  /// Push to queues and move class centers.
  bool update_state = true;
};

namespace detail {

inline Tensor zero_scalar() { return Tensor::scalar(0.0); }

inline std::vector<std::size_t> mi_sample(std::size_t n, std::size_t batch, std::uint64_t seed) {
  if (n <= batch) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  auto perm = random_permutation(n, seed);
  perm.resize(batch);
  std::sort(perm.begin(), perm.end());
  return perm;
}

/// Supervised contrastive loss over rows of z with the given labels.
inline Tensor supervised_contrastive(const Tensor& z, std::span<const std::size_t> labels, double tau) {
  const std::size_t m = z.rows();
  std::vector<double> weight(m * m, 0.0);
  std::size_t anchors = 0;
  std::vector<std::size_t> positives(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && labels[i] == labels[j]) ++positives[i];
    if (positives[i] > 0) ++anchors;
  }
  if (anchors == 0) return zero_scalar();
  for (std::size_t i = 0; i < m; ++i) {
    if (positives[i] == 0) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j && labels[i] == labels[j]) {
        weight[i * m + j] = -1.0 / (static_cast<double>(positives[i]) * static_cast<double>(anchors));
      }
    }
  }
  std::vector<double> self(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) self[i * m + i] = -1e9;
  Tensor logits = add(similarity(z, z, tau), Tensor::from({m, m}, std::move(self)));
  return sum(mul(log_softmax(logits), Tensor::from({m, m}, std::move(weight))));
}

}  // namespace detail

/// Composes every training objective from one forward pass.
///
/// Mutates model state (queues, class centers) only when update_state is set,
/// apart from the one-time queue warm start.
inline LossBundle total_loss(CCAGNNModel& model, const ForwardOutput& out, const LossTargets& targets,
                             const LossWeights& w) {
  const ModelConfig& cfg = model.config();
  const std::size_t n = out.fusion_logits.rows();
  const std::size_t c = cfg.num_classes;
  if (targets.labels.size() != n) throw DimensionError("total_loss: label vector length mismatch");
  if (targets.train.empty()) throw ContractError("total_loss: no training nodes");
  std::vector<std::size_t> train_labels;
  std::vector<char> is_train(n, 0);
  for (std::size_t i : targets.train) {
    if (i >= n) throw StructureError("total_loss: training node out of range");
    is_train[i] = 1;
    train_labels.push_back(targets.labels[i]);
    if (train_labels.back() >= c) throw StructureError("total_loss: training label out of range");
  }

  LossBundle b;
  b.adaptive = w.ramp(targets.progress);
  if (cfg.baseline) {
    b.ce_fusion = cross_entropy(out.fusion_logits, targets.train, train_labels);
    b.ce_causal = b.ce_intervention = b.ce_noncausal_uniform = b.mi = b.cond_mi = b.pred_mi = b.inv_mi = b.orth =
        b.contrastive = b.center = b.gate_conf = detail::zero_scalar();
    b.total = b.ce_fusion;
    if (!std::isfinite(b.total.item())) throw NonFiniteLoss("ce_fusion", b.total.item());
    return b;
  }

  b.ce_causal = cross_entropy(out.causal_logits, targets.train, train_labels);
  b.ce_fusion = cross_entropy(out.fusion_logits, targets.train, train_labels);

  // Counterfactual rows: node i carries the causal features of perm[i] and is
  // asked for that node's label.
  std::vector<std::size_t> int_rows, int_labels;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = out.permutation[i];
    if (is_train[src]) {
      int_rows.push_back(i);
      int_labels.push_back(targets.labels[src]);
    }
  }
  b.ce_intervention = int_rows.empty() ? detail::zero_scalar()
                                       : cross_entropy(out.intervention_logits, int_rows, int_labels);

  // KL(uniform || softmax) averaged over training nodes.
  b.ce_noncausal_uniform = shift(scale(mean(gather_rows(log_softmax(out.noncausal_logits), targets.train)), -1.0),
                                 -std::log(static_cast<double>(c)));

  // MI terms over a node sample. Conditioning uses train labels where known and
  // the current fused prediction elsewhere.
  const auto batch = detail::mi_sample(n, cfg.mi_batch, targets.batch_seed);
  std::vector<std::size_t> cond(batch.size());
  std::vector<std::size_t> labelled_rows, labelled_classes;
  auto fl = out.fusion_logits.values();
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const std::size_t i = batch[r];
    if (is_train[i]) {
      cond[r] = targets.labels[i];
      labelled_rows.push_back(r);
      labelled_classes.push_back(cond[r]);
    } else {
      const auto row = fl.subspan(i * c, c);
      cond[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  Tensor xc_b = gather_rows(out.x_c, batch);
  Tensor xo_b = gather_rows(out.x_o, batch);
  MIEstimator& est = model.mi();
  const double tau = est.temperature();
  Tensor u = est.encode_causal(xc_b);
  Tensor v = est.encode_noncausal(xo_b);
  if (cfg.mi.shared_encoder) {
    b.mi = est.in_batch_mi_loss_projected(u, v);
    b.cond_mi = detail::zero_scalar();
  } else {
    if (!model.mi_warm()) {
      est.warm_start_projected(u, cond);
      model.set_mi_warm(true);
    }
    b.mi = est.mi_loss_projected(u, v, targets.update_state);
    auto conditional = est.conditional_mi_loss_projected(u, v, cond, targets.update_state);
    b.cond_mi = conditional.loss;
    b.skipped_classes = std::move(conditional.skipped);
  }

  // Prediction-relevant term: causal projections against class prototypes.
  if (labelled_rows.empty()) {
    b.pred_mi = detail::zero_scalar();
  } else {
    std::vector<std::size_t> rows(labelled_rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    b.pred_mi = cross_entropy(similarity(gather_rows(u, labelled_rows), model.prototypes(), tau), rows,
                              labelled_classes);
  }

  // Invariance term: augmented causal projection i should match clean projection i.
  {
    Tensor uc = out.clean_x_c.id() == out.x_c.id() ? u : est.encode_causal(gather_rows(out.clean_x_c, batch));
    std::vector<std::size_t> diag(batch.size());
    for (std::size_t r = 0; r < diag.size(); ++r) diag[r] = r;
    b.inv_mi = cross_entropy(similarity(u, uc, tau), diag, diag);
  }

  b.orth = orthogonality_loss(out.x_c, out.x_o);

  const Tensor& z = out.fusion.fused;
  b.contrastive = labelled_rows.size() < 2
                      ? detail::zero_scalar()
                      : detail::supervised_contrastive(gather_rows(gather_rows(z, batch), labelled_rows),
                                                       labelled_classes, cfg.contrastive_temperature);

  // Center loss against EMA class centers, initialised from the first call's class means.
  {
    const std::size_t d = z.cols();
    Tensor zt = gather_rows(z, targets.train);
    std::vector<double> means(c * d, 0.0);
    std::vector<std::size_t> counts(c, 0);
    auto zv = zt.values();
    for (std::size_t r = 0; r < train_labels.size(); ++r) {
      ++counts[train_labels[r]];
      for (std::size_t j = 0; j < d; ++j) means[train_labels[r] * d + j] += zv[r * d + j];
    }
    for (std::size_t k = 0; k < c; ++k)
      if (counts[k])
        for (std::size_t j = 0; j < d; ++j) means[k * d + j] /= static_cast<double>(counts[k]);
    auto& centers = model.centers();
    if (!model.centers_ready()) {
      centers = means;
      model.set_centers_ready(true);
    }
    Tensor assigned = gather_rows(Tensor::from({c, d}, centers), train_labels);
    b.center = scale(sum(square(sub(zt, assigned))), 1.0 / static_cast<double>(train_labels.size()));
    if (targets.update_state) {
      const double decay = cfg.center_decay;
      for (std::size_t k = 0; k < c; ++k)
        if (counts[k])
          for (std::size_t j = 0; j < d; ++j)
            centers[k * d + j] = decay * centers[k * d + j] + (1.0 - decay) * means[k * d + j];
    }
  }

  // Gate confidence: push alpha to 1 where the causal branch is more confident
  // on the true class than the non-causal one. BCE in logit form.
  {
    Tensor pc = log_softmax(out.causal_logits.detach());
    Tensor po = log_softmax(out.noncausal_logits.detach());
    std::vector<double> t(train_labels.size());
    for (std::size_t r = 0; r < t.size(); ++r) {
      const std::size_t i = targets.train[r];
      t[r] = pc.at(i, train_labels[r]) > po.at(i, train_labels[r]) ? 1.0 : 0.0;
    }
    Tensor s = gather_rows(out.fusion.logit, targets.train);
    b.gate_conf = mean(sub(softplus(s), mul(Tensor::column(std::move(t)), s)));
  }

  const double a = b.adaptive;
  Tensor total = scale(b.ce_causal, w.ce_causal);
  auto acc = [&](const Tensor& term, double weight) {
    if (weight != 0.0) total = add(total, scale(term, weight));
  };
  acc(b.ce_fusion, w.ce_fusion);
  acc(b.ce_intervention, a * w.ce_intervention);
  acc(b.ce_noncausal_uniform, w.ce_noncausal);
  acc(b.mi, a * w.mi);
  acc(b.cond_mi, a * w.cond_mi);
  acc(b.pred_mi, w.pred_mi);
  acc(b.inv_mi, w.inv_mi);
  acc(b.orth, w.orth);
  acc(b.contrastive, w.contrastive);
  acc(b.center, w.center);
  acc(b.gate_conf, w.gate_conf);
  b.total = total;

  const auto vals = b.values();
  for (std::size_t k = 0; k < vals.size(); ++k) {
    if (!std::isfinite(vals[k])) throw NonFiniteLoss(kLossComponents[k], vals[k]);
  }
  return b;
}

}  // namespace ccagnn
