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
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccagnn/graph.hpp"
#include "ccagnn/ops.hpp"
#include "ccagnn/random.hpp"

namespace ccagnn {

struct AugmentationConfig {
  double noise_scale = 0.1;
  double mask_rate = 0.1;
  double edge_drop_rate = 0.05;
  double edge_add_rate = 0.05;
  bool noise = true;
  bool mask = true;
  bool edges = true;
  std::uint64_t seed = 0;

  void validate() const {
    auto unit = [](double v, const char* what) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
    };
    unit(noise_scale, "noise_scale");
    unit(mask_rate, "mask_rate");
    unit(edge_drop_rate, "edge_drop_rate");
    unit(edge_add_rate, "edge_add_rate");
  }

  static AugmentationConfig none() {
    AugmentationConfig c;
    c.noise = c.mask = c.edges = false;
    c.noise_scale = c.mask_rate = c.edge_drop_rate = c.edge_add_rate = 0.0;
    return c;
  }
};

/// Per-node attention importance: the mean, over heads and over the edges the
/// node sends messages along (its own self-loop included), of the attention
/// those edges receive. `attention` is [E x heads] in CSR order of `csr`.
inline std::vector<double> attention_importance(const Tensor& attention, const EdgeIndex& csr, std::size_t n) {
  if (attention.rows() != csr.num_edges()) {
    throw DimensionError("attention_importance: " + std::to_string(attention.rows()) + " attention rows for " +
                         std::to_string(csr.num_edges()) + " edges");
  }
  const std::size_t heads = attention.cols();
  std::vector<double> total(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  auto a = attention.values();
  for (std::size_t r = 0; r < csr.num_edges(); ++r) {
    const std::size_t s = csr.sources[r];
    for (std::size_t h = 0; h < heads; ++h) total[s] += a[r * heads + h];
    count[s] += heads;
  }
  for (std::size_t i = 0; i < n; ++i) total[i] = count[i] ? total[i] / static_cast<double>(count[i]) : 0.0;
  return total;
}

/// h + noise_scale * importance_i * eps with eps standard normal per element.
inline Tensor augment_noise(const Tensor& h, std::span<const double> importance, double noise_scale,
                            std::uint64_t seed) {
  if (importance.size() != h.rows()) {
    throw DimensionError("augment_noise: " + std::to_string(importance.size()) + " importances for " +
                         std::to_string(h.rows()) + " rows");
  }
  if (noise_scale == 0.0) return h;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = h.cols();
  std::vector<double> eps(h.size());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) eps[i * d + j] = noise_scale * importance[i] * normal(rng);
  }
  return add(h, Tensor::from(h.shape(), std::move(eps)));
}

/// |grad| scaled to [0, 1] by each row's maximum; all-zero rows read as 1.
inline std::vector<double> normalize_importance(std::span<const double> grad, std::size_t rows, std::size_t cols) {
  if (grad.size() != rows * cols) throw DimensionError("normalize_importance: size mismatch");
  std::vector<double> out(grad.size(), 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double peak = 0.0;
    for (std::size_t j = 0; j < cols; ++j) peak = std::max(peak, std::abs(grad[i * cols + j]));
    if (peak == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = std::abs(grad[i * cols + j]) / peak;
  }
  return out;
}

/// Zeroes each element with probability mask_rate * importance (empty
/// importance means 1 everywhere).
inline Tensor augment_mask(const Tensor& h, std::span<const double> importance, double mask_rate,
                           std::uint64_t seed) {
  if (!importance.empty() && importance.size() != h.size()) {
    throw DimensionError("augment_mask: importance of size " + std::to_string(importance.size()) + " for " +
                         shape_str(h.shape()));
  }
  if (mask_rate == 0.0) return h;
  Rng rng(seed);
  std::vector<double> keep(h.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const double p = mask_rate * (importance.empty() ? 1.0 : importance[k]);
    keep[k] = uniform01(rng) < p ? 0.0 : 1.0;
  }
  return apply_mask(h, std::move(keep));
}

/// Drops every non-self-loop edge with probability drop_rate, then inserts
/// round(add_rate * E) new directed edges, where E counts the original
/// non-self-loop edges. New edges avoid self-loops and any edge already kept
/// or added. Kept edges retain their order; new ones follow.
inline Graph augment_edges(const Graph& g, double drop_rate, double add_rate, std::uint64_t seed) {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0) || !(add_rate >= 0.0 && add_rate <= 1.0)) {
    throw std::invalid_argument("augment_edges: rates must lie in [0, 1]");
  }
  if (drop_rate == 0.0 && add_rate == 0.0) return g;
  Rng rng(seed);
  const std::size_t n = g.num_nodes();
  std::vector<Edge> kept;
  kept.reserve(g.num_edges());
  std::size_t regular = 0;
  for (const Edge& e : g.edges()) {
    if (e.src == e.dst) {
      kept.push_back(e);
      continue;
    }
    ++regular;
    if (uniform01(rng) >= drop_rate) kept.push_back(e);
  }
  const auto extra = static_cast<std::size_t>(std::llround(add_rate * static_cast<double>(regular)));
  if (extra > 0 && n > 1) {
    std::set<Edge> present(kept.begin(), kept.end());
    std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(n - 1));
    const std::size_t limit = 100 * extra + 1000;
    std::size_t added = 0;
    for (std::size_t attempt = 0; attempt < limit && added < extra; ++attempt) {
      const std::uint32_t s = node(rng), t = node(rng);
      if (s == t) continue;
      if (!present.insert({s, t}).second) continue;
      kept.push_back({s, t});
      ++added;
    }
  }
  return g.with_edges(std::move(kept));
}

}  // namespace ccagnn
