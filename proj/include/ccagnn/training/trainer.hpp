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
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ccagnn/folds.hpp"
#include "ccagnn/loss.hpp"
#include "ccagnn/model.hpp"
#include "ccagnn/training/adam.hpp"
#include "ccagnn/training/metrics.hpp"

namespace ccagnn {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t patience = 5;
  /// Optimizer steps per epoch (each a full-batch step with fresh augmentation).
  std::size_t steps_per_epoch = 1;
  AdamConfig adam;
  LossWeights weights;
  AugmentationConfig augmentation;
  /// Architecture; in_dim and num_classes are filled from the graph.
  ModelConfig model;
  F1Average average = F1Average::macro;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (patience == 0) throw std::invalid_argument("patience must be positive");
    if (steps_per_epoch == 0) throw std::invalid_argument("steps per epoch must be positive");
    adam.validate();
    weights.validate();
    augmentation.validate();
  }

  /// Plain attention-network baseline: shared trunk, fusion-style single CE.
  TrainConfig as_baseline() const {
    TrainConfig c = *this;
    c.model.baseline = true;
    c.weights = LossWeights::fusion_only();
    return c;
  }

  TrainConfig with_variant(Variant v) const {
    TrainConfig c = *this;
    apply_variant(v, c.model, c.weights);
    return c;
  }
};

struct EpochRecord {
  std::size_t fold = 0;
  /// 1-based.
  std::size_t epoch = 0;
  /// kLossComponents order, from the epoch's last step.
  std::array<double, 13> losses{};
  double train_f1 = 0.0;
  double val_f1 = 0.0;
  double gate_mean = 0.0, gate_min = 0.0, gate_max = 0.0;
  double alpha_mean = 0.0;
  double alpha_int = 0.0;
  double adaptive = 1.0;
  std::size_t skipped_classes = 0;
  double seconds = 0.0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<EpochRecord> epochs;
  double test_f1 = 0.0;
  /// 1-based epoch whose parameters were restored.
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  double seconds = 0.0;
  std::shared_ptr<CCAGNNModel> model;
};

struct CVResult {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double stddev = 0.0;
};

namespace detail {

inline std::vector<std::size_t> labels_at(std::span<const std::size_t> labels, std::span<const std::size_t> nodes) {
  std::vector<std::size_t> out;
  out.reserve(nodes.size());
  for (std::size_t i : nodes) out.push_back(labels[i]);
  return out;
}

inline std::vector<std::size_t> preds_at(const std::vector<std::size_t>& preds, std::span<const std::size_t> nodes) {
  std::vector<std::size_t> out;
  out.reserve(nodes.size());
  for (std::size_t i : nodes) out.push_back(preds[i]);
  return out;
}

}  // namespace detail

/// Inference predictions (fusion branch argmax) for every node.
inline std::vector<std::size_t> predict_labels(const CCAGNNModel& model, const Graph& g) {
  Tape::NoGrad ng;
  return argmax_rows(model.predict(g).fusion_logits);
}

/// Trains one fold on graph g (self-loops required).
///
/// Only labels of fold.train enter the loss and only labels of fold.val are
/// read before the final evaluation. Test F1 is computed once at the end on
/// fold.test of `eval_graph` (g itself when null) with the best-validation
/// parameters restored.
inline FoldResult train_fold(const Graph& g, const Fold& fold, const TrainConfig& base, std::size_t fold_index,
                             const Graph* eval_graph = nullptr) {
  base.validate();
  if (fold.train.empty()) throw ContractError("train_fold: empty training set");
  if (fold.val.empty()) throw ContractError("train_fold: empty validation set");
  TrainConfig cfg = base;
  cfg.model.in_dim = g.num_features();
  cfg.model.num_classes = g.num_classes();
  const std::uint64_t fold_seed = derive_seed(cfg.seed, 0x666f6c64, fold_index);
  auto model = std::make_shared<CCAGNNModel>(cfg.model, fold_seed);
  ParameterList& params = model->parameters();
  Adam adam(params, cfg.adam);
  const std::size_t n = g.num_nodes(), c = g.num_classes();

  // Label view restricted to the training nodes; everything else reads as 0.
  std::vector<std::size_t> train_labels(n, 0);
  for (std::size_t i : fold.train) train_labels[i] = g.labels()[i];
  const auto train_truth = detail::labels_at(g.labels(), fold.train);
  const auto val_truth = detail::labels_at(g.labels(), fold.val);

  FoldResult result;
  result.fold = fold_index;
  const auto fold_start = std::chrono::steady_clock::now();
  std::vector<double> input_grad;
  std::vector<std::vector<double>> best;
  std::size_t since_best = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto epoch_start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.fold = fold_index;
    rec.epoch = e + 1;
    const double progress = cfg.epochs > 1 ? static_cast<double>(e) / static_cast<double>(cfg.epochs - 1) : 1.0;
    for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s) {
      const std::uint64_t step_seed = derive_seed(fold_seed, 0x73746570, e, s);
      std::vector<double> importance;
      if (!input_grad.empty()) importance = normalize_importance(input_grad, n, g.num_features());
      Tape tape;
      Tape::Scope scope(tape);
      ForwardOutput out = model->forward(g, cfg.augmentation, true, step_seed, importance);
      LossTargets targets{train_labels, fold.train, progress, derive_seed(step_seed, 0x6d69), true};
      LossBundle loss = total_loss(*model, out, targets, cfg.weights);
      tape.backward(loss.total);
      input_grad.assign(out.input.grad().begin(), out.input.grad().end());
      adam.step(params);

      rec.losses = loss.values();
      rec.adaptive = loss.adaptive;
      rec.skipped_classes = loss.skipped_classes.size();
      if (out.rep.gate.defined()) {
        auto gv = out.rep.gate.values();
        rec.gate_mean = mean_of(gv);
        rec.gate_min = *std::min_element(gv.begin(), gv.end());
        rec.gate_max = *std::max_element(gv.begin(), gv.end());
        rec.alpha_mean = mean_of(out.fusion.alpha.values());
        rec.alpha_int = out.alpha_int.item();
      }
    }
    const auto preds = predict_labels(*model, g);
    rec.train_f1 = f1_score(detail::preds_at(preds, fold.train), train_truth, c, cfg.average);
    rec.val_f1 = f1_score(detail::preds_at(preds, fold.val), val_truth, c, cfg.average);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.epochs.push_back(rec);

    if (e == 0 || rec.val_f1 > result.best_val_f1) {
      result.best_val_f1 = rec.val_f1;
      result.best_epoch = rec.epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  restore(params, best);

  const Graph& eg = eval_graph ? *eval_graph : g;
  const auto test_preds = predict_labels(*model, eg);
  result.test_f1 =
      f1_score(detail::preds_at(test_preds, fold.test), detail::labels_at(eg.labels(), fold.test), c, cfg.average);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - fold_start).count();
  result.model = model;
  return result;
}

/// Runs fn(0..count-1) on up to `jobs` threads; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

/// k-fold cross-validation; every fold gets its own model, optimizer and seed.
inline CVResult cross_validate(const Graph& g, const FoldPlan& plan, const TrainConfig& cfg,
                               const Graph* eval_graph = nullptr, std::size_t jobs = 1) {
  CVResult cv;
  cv.plan = plan;
  cv.folds.resize(plan.folds.size());
  parallel_for(plan.folds.size(), jobs,
               [&](std::size_t f) { cv.folds[f] = train_fold(g, plan.folds[f], cfg, f, eval_graph); });
  std::vector<double> scores;
  for (const auto& f : cv.folds) scores.push_back(f.test_f1);
  cv.mean = mean_of(scores);
  cv.stddev = stddev_of(scores);
  return cv;
}

struct AblationResult {
  Variant variant = Variant::full;
  CVResult cv;
};

inline std::vector<AblationResult> run_ablation(const Graph& g, const FoldPlan& plan, const TrainConfig& cfg,
                                                const std::vector<Variant>& variants,
                                                const Graph* eval_graph = nullptr, std::size_t jobs = 1) {
  std::vector<AblationResult> out(variants.size());
  parallel_for(variants.size(), jobs, [&](std::size_t k) {
    out[k].variant = variants[k];
    out[k].cv = cross_validate(g, plan, cfg.with_variant(variants[k]), eval_graph, 1);
  });
  return out;
}

}  // namespace ccagnn
