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
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "ccagnn/layers/gate.hpp"

namespace ccagnn {

/// Bounded FIFO of embedding rows. Stored values carry no gradient.
class NegativeQueue {
 public:
  NegativeQueue() = default;
  NegativeQueue(std::size_t capacity, std::size_t width) : capacity_(capacity), width_(width) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  void clear() { rows_.clear(); }

  /// Appends every row of `rows`, evicting the oldest entries beyond capacity.
  void push(const Tensor& rows) {
    if (rows.cols() != width_) {
      throw DimensionError("NegativeQueue::push: rows of width " + std::to_string(rows.cols()) +
                           ", queue width " + std::to_string(width_));
    }
    auto v = rows.values();
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      rows_.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(r * width_),
                         v.begin() + static_cast<std::ptrdiff_t>((r + 1) * width_));
      if (rows_.size() > capacity_) rows_.pop_front();
    }
  }

  /// Oldest first, [size x width], constant.
  Tensor tensor() const {
    std::vector<double> out;
    out.reserve(rows_.size() * width_);
    for (const auto& r : rows_) out.insert(out.end(), r.begin(), r.end());
    return Tensor::from({rows_.size(), width_}, std::move(out));
  }

  const std::deque<std::vector<double>>& rows() const { return rows_; }

 private:
  std::size_t capacity_ = 0;
  std::size_t width_ = 0;
  std::deque<std::vector<double>> rows_;
};

/// Two-layer projection d -> hidden -> p with ELU in between.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
      : first_(in, hidden, rng), second_(hidden, out, rng) {}

  Tensor operator()(const Tensor& x) const { return second_(elu(first_(x))); }

  void register_parameters(ParameterList& params, const std::string& prefix) const {
    first_.register_parameters(params, prefix + ".0");
    second_.register_parameters(params, prefix + ".1");
  }

 private:
  Linear first_;
  Linear second_;
};

struct MIConfig {
  std::size_t hidden = 64;
  std::size_t proj_dim = 1024;
  double temperature = 0.1;
  std::size_t queue_capacity = 256;
  std::size_t class_queue_capacity = 64;
  /// One projection serves both pathways; used by the basic_mi variant.
  bool shared_encoder = false;
};

/// Cosine similarity matrix of the rows of u against the rows of v, over tau.
inline Tensor similarity(const Tensor& u, const Tensor& v, double tau) {
  return scale(matmul(normalize_rows(u), transpose(normalize_rows(v))), 1.0 / tau);
}

/// mean_i T(u_i, v_i) - mean_i log(mean_k exp T(q_k, v_i)) for constant negatives q.
inline Tensor contrastive_mi(const Tensor& u, const Tensor& v, const Tensor& negatives, double tau) {
  if (negatives.rows() == 0) throw ContractError("MI estimate with an empty negative set");
  Tensor positive = scale(mean(dot_rows(normalize_rows(u), normalize_rows(v))), 1.0 / tau);
  Tensor log_expect = shift(logsumexp_rows(similarity(v, negatives, tau)),
                            -std::log(static_cast<double>(negatives.rows())));
  return sub(positive, mean(log_expect));
}

/// Queue-based contrastive estimate of the dependence between two pathways.
class MIEstimator {
 public:
  struct Conditional {
    Tensor loss;
    std::vector<std::size_t> skipped;
    std::size_t classes_used = 0;
  };

  MIEstimator() = default;

  MIEstimator(std::size_t dim, std::size_t num_classes, const MIConfig& config, Rng& rng)
      : config_(config),
        f_c_(dim, config.hidden, config.proj_dim, rng),
        queue_(config.queue_capacity, config.proj_dim) {
    if (!(config.temperature > 0.0)) throw std::invalid_argument("MI temperature must be positive");
    if (!config.shared_encoder) f_o_ = ProjectionHead(dim, config.hidden, config.proj_dim, rng);
    class_queues_.assign(num_classes, NegativeQueue(config.class_queue_capacity, config.proj_dim));
  }

  const MIConfig& config() const { return config_; }
  double temperature() const { return config_.temperature; }

  void register_parameters(ParameterList& params, const std::string& prefix) const {
    f_c_.register_parameters(params, prefix + ".f_c");
    if (!config_.shared_encoder) f_o_.register_parameters(params, prefix + ".f_o");
  }

  Tensor encode_causal(const Tensor& x_c) const { return f_c_(x_c); }
  Tensor encode_noncausal(const Tensor& x_o) const { return config_.shared_encoder ? f_c_(x_o) : f_o_(x_o); }

  NegativeQueue& queue() { return queue_; }
  const NegativeQueue& queue() const { return queue_; }
  NegativeQueue& class_queue(std::size_t k) { return class_queues_.at(k); }
  std::size_t num_classes() const { return class_queues_.size(); }

  /// Seeds every empty queue from f_c(x_c); class queues take the rows of their class.
  void warm_start(const Tensor& x_c, std::span<const std::size_t> classes) {
    Tensor u;
    {
      Tape::NoGrad ng;
      u = f_c_(x_c);
    }
    warm_start_projected(u, classes);
  }

  void warm_start_projected(const Tensor& projected, std::span<const std::size_t> classes) {
    Tensor u = projected.detach();
    if (queue_.empty()) queue_.push(u);
    for (std::size_t k = 0; k < class_queues_.size(); ++k) {
      if (!class_queues_[k].empty()) continue;
      auto rows = rows_of(classes, k);
      if (!rows.empty()) class_queues_[k].push(gather_rows(u, rows));
    }
  }

  /// Queue-negative estimate; pushes the detached f_c rows afterwards when update is set.
  Tensor mi_loss(const Tensor& x_c, const Tensor& x_o, bool update = true) {
    detail::require_same_shape(x_c, x_o, "mi_loss");
    return mi_loss_projected(encode_causal(x_c), encode_noncausal(x_o), update);
  }

  /// mi_loss on precomputed projections u = f_c(x_c), v = f_o(x_o).
  Tensor mi_loss_projected(const Tensor& u, const Tensor& v, bool update = true) {
    if (queue_.empty()) throw ContractError("mi_loss: negative queue is empty; warm-start it first");
    Tensor loss = contrastive_mi(u, v, queue_.tensor(), config_.temperature);
    if (update) queue_.push(u.detach());
    return loss;
  }

  /// Same estimate with the batch's own f_c embeddings as negatives and no queue.
  Tensor in_batch_mi_loss(const Tensor& x_c, const Tensor& x_o) const {
    detail::require_same_shape(x_c, x_o, "in_batch_mi_loss");
    return in_batch_mi_loss_projected(encode_causal(x_c), encode_noncausal(x_o));
  }

  Tensor in_batch_mi_loss_projected(const Tensor& u, const Tensor& v) const {
    Tensor positive = scale(mean(dot_rows(normalize_rows(u), normalize_rows(v))), 1.0 / config_.temperature);
    Tensor log_expect = shift(logsumexp_rows(similarity(v, u, config_.temperature)),
                              -std::log(static_cast<double>(u.rows())));
    return sub(positive, mean(log_expect));
  }

  /// Per-class estimate against per-class queues, averaged over the classes used.
  /// Classes present in the batch whose queue is empty are skipped and reported.
  Conditional conditional_mi_loss(const Tensor& x_c, const Tensor& x_o, std::span<const std::size_t> classes,
                                  bool update = true) {
    detail::require_same_shape(x_c, x_o, "conditional_mi_loss");
    return conditional_mi_loss_projected(encode_causal(x_c), encode_noncausal(x_o), classes, update);
  }

  /// conditional_mi_loss on precomputed projections.
  Conditional conditional_mi_loss_projected(const Tensor& u, const Tensor& v, std::span<const std::size_t> classes,
                                            bool update = true) {
    if (classes.size() != u.rows()) {
      throw DimensionError("conditional_mi_loss: " + std::to_string(classes.size()) + " classes for " +
                           std::to_string(u.rows()) + " rows");
    }
    for (std::size_t c : classes) {
      if (c >= class_queues_.size()) throw StructureError("conditional_mi_loss: class " + std::to_string(c) + " out of range");
    }
    Conditional out;
    Tensor total;
    for (std::size_t k = 0; k < class_queues_.size(); ++k) {
      auto rows = rows_of(classes, k);
      if (rows.empty()) continue;
      if (class_queues_[k].empty()) {
        out.skipped.push_back(k);
        continue;
      }
      Tensor term = contrastive_mi(gather_rows(u, rows), gather_rows(v, rows), class_queues_[k].tensor(),
                                   config_.temperature);
      total = total.defined() ? add(total, term) : term;
      ++out.classes_used;
    }
    out.loss = out.classes_used == 0 ? Tensor::scalar(0.0) : scale(total, 1.0 / static_cast<double>(out.classes_used));
    if (update) {
      Tensor detached = u.detach();
      for (std::size_t k = 0; k < class_queues_.size(); ++k) {
        auto rows = rows_of(classes, k);
        if (!rows.empty()) class_queues_[k].push(gather_rows(detached, rows));
      }
    }
    return out;
  }

 private:
  static std::vector<std::size_t> rows_of(std::span<const std::size_t> classes, std::size_t k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == k) rows.push_back(i);
    return rows;
  }

  MIConfig config_;
  ProjectionHead f_c_;
  ProjectionHead f_o_;
  NegativeQueue queue_;
  std::vector<NegativeQueue> class_queues_;
};

}  // namespace ccagnn
