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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccagnn/graph.hpp"
#include "ccagnn/random.hpp"

namespace ccagnn {

/// Parameters of a confounded node-classification benchmark.
///
/// A discrete confounder Z equals the label with probability rho (otherwise a
/// uniformly chosen different class) and shifts the spurious feature block.
/// The causal block depends on the label alone. Train and test views draw
/// everything independently and differ only in rho.
struct SyntheticSpec {
  std::size_t num_nodes = 1000;
  std::size_t causal_dims = 8;
  std::size_t spurious_dims = 8;
  std::size_t num_classes = 2;
  double rho_train = 0.95;
  double rho_test = 0.05;
  double p_in = 0.02;
  double p_out = 0.002;
  std::uint64_t seed = 0;
  /// Mean offset of a class on its causal coordinates.
  double causal_shift = 1.0;
  /// Mean offset of a confounder value on its spurious coordinates.
  double spurious_shift = 1.5;

  void validate() const {
    auto unit = [](double v, const char* what) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
    };
    unit(rho_train, "rho_train");
    unit(rho_test, "rho_test");
    unit(p_in, "p_in");
    unit(p_out, "p_out");
    if (p_in < p_out) throw std::invalid_argument("p_in must be >= p_out");
    if (num_nodes == 0) throw std::invalid_argument("num_nodes must be positive");
    if (num_classes < 2 || num_classes > 65535) throw std::invalid_argument("num_classes must lie in [2, 65535]");
    if (causal_dims == 0) throw std::invalid_argument("causal_dims must be positive");
  }
};

struct SyntheticView {
  Graph graph;
  /// Confounder value per node.
  std::vector<std::size_t> confounder;
};

struct SyntheticData {
  SyntheticView train;
  SyntheticView test;
  std::vector<std::size_t> causal_features;
  std::vector<std::size_t> spurious_features;
};

namespace detail {

inline SyntheticView synth_view(const SyntheticSpec& spec, double rho, std::uint64_t seed, const std::string& name) {
  const std::size_t n = spec.num_nodes, c = spec.num_classes;
  const std::size_t dc = spec.causal_dims, ds = spec.spurious_dims, d = dc + ds;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_class(0, c - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, c - 2);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::size_t> labels(n), confounder(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = pick_class(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform01(rng) < rho) {
      confounder[i] = labels[i];
    } else {
      const std::size_t k = pick_other(rng);
      confounder[i] = k >= labels[i] ? k + 1 : k;
    }
  }

  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dc; ++j) {
      x[i * d + j] = noise(rng) + (j % c == labels[i] ? spec.causal_shift : 0.0);
    }
    for (std::size_t j = 0; j < ds; ++j) {
      x[i * d + dc + j] = noise(rng) + (j % c == confounder[i] ? spec.spurious_shift : 0.0);
    }
  }

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? spec.p_in : spec.p_out;
      if (uniform01(rng) < p) {
        edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
        edges.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
      }
    }
  }
  return {Graph(name, n, d, c, std::move(x), std::move(edges), std::move(labels), false), std::move(confounder)};
}

}  // namespace detail

/// Draws the train and test views. Feature columns [0, causal_dims) are
/// causal, the following spurious_dims columns are spurious.
inline SyntheticData synth_confounded(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  data.train = detail::synth_view(spec, spec.rho_train, derive_seed(spec.seed, 1), "synthetic-train");
  data.test = detail::synth_view(spec, spec.rho_test, derive_seed(spec.seed, 2), "synthetic-test");
  for (std::size_t j = 0; j < spec.causal_dims; ++j) data.causal_features.push_back(j);
  for (std::size_t j = 0; j < spec.spurious_dims; ++j) data.spurious_features.push_back(spec.causal_dims + j);
  return data;
}

/// Erdos-Renyi graph with symmetric edges, Gaussian features, uniform labels
/// and self-loops added. Used for small randomized checks.
inline Graph random_graph(std::size_t n, std::size_t d, std::size_t c, double p, std::uint64_t seed) {
  if (n == 0 || d == 0 || c == 0) throw std::invalid_argument("random_graph: sizes must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, c - 1);
  std::vector<double> x(n * d);
  for (double& v : x) v = normal(rng);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = pick(rng);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (uniform01(rng) < p) {
        edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
        edges.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
      }
    }
  }
  return add_self_loops(Graph("random", n, d, c, std::move(x), std::move(edges), std::move(labels), false));
}

}  // namespace ccagnn
