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
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ccagnn/tensor.hpp"

namespace ccagnn {

/// Directed edge carrying a message from src to dst.
struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Edges grouped by target node (CSR over incoming edges).
///
/// Edge r runs from sources[r] to targets[r]; targets is non-decreasing and
/// offsets[i]..offsets[i+1] delimits the incoming edges of node i.
struct EdgeIndex {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;

  std::size_t num_edges() const { return sources.size(); }
};

inline EdgeIndex build_edge_index(std::size_t n, const std::vector<Edge>& edges) {
  EdgeIndex idx;
  idx.offsets.assign(n + 1, 0);
  for (const Edge& e : edges) ++idx.offsets[e.dst + 1];
  for (std::size_t i = 0; i < n; ++i) idx.offsets[i + 1] += idx.offsets[i];
  idx.sources.resize(edges.size());
  idx.targets.resize(edges.size());
  std::vector<std::size_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
  for (const Edge& e : edges) {
    const std::size_t slot = cursor[e.dst]++;
    idx.sources[slot] = e.src;
    idx.targets[slot] = e.dst;
  }
  return idx;
}

/// Immutable attributed graph. Feature storage is shared between views that
/// differ only in edges or labels.
class Graph {
 public:
  Graph() = default;

  Graph(std::string name, std::size_t num_nodes, std::size_t num_features, std::size_t num_classes,
        std::vector<double> features, std::vector<Edge> edges, std::vector<std::size_t> labels,
        bool directed = false)
      : name_(std::move(name)),
        n_(num_nodes),
        d_(num_features),
        c_(num_classes),
        features_(std::make_shared<const std::vector<double>>(std::move(features))),
        edges_(std::move(edges)),
        labels_(std::make_shared<const std::vector<std::size_t>>(std::move(labels))),
        directed_(directed) {
    validate();
    finish();
  }

  const std::string& name() const { return name_; }
  std::size_t num_nodes() const { return n_; }
  std::size_t num_features() const { return d_; }
  std::size_t num_classes() const { return c_; }
  std::size_t num_edges() const { return edges_.size(); }
  bool directed() const { return directed_; }
  bool self_loops_added() const { return self_loops_added_; }

  const std::vector<double>& features() const { return *features_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& labels() const { return *labels_; }
  const EdgeIndex& csr() const { return csr_; }

  /// True when every node has at least one incoming self-loop.
  bool has_self_loops() const { return all_self_loops_; }

  /// Features as a constant [n x d] tensor.
  Tensor feature_tensor(bool requires_grad = false) const {
    return Tensor::from({n_, d_}, *features_, requires_grad);
  }

  /// Sources of the incoming edges of node i, in CSR order.
  std::vector<std::size_t> in_neighbours(std::size_t i) const {
    return {csr_.sources.begin() + static_cast<std::ptrdiff_t>(csr_.offsets[i]),
            csr_.sources.begin() + static_cast<std::ptrdiff_t>(csr_.offsets[i + 1])};
  }

  Graph with_edges(std::vector<Edge> edges) const {
    Graph g = *this;
    g.edges_ = std::move(edges);
    g.validate();
    g.finish();
    return g;
  }

  Graph with_labels(std::vector<std::size_t> labels) const {
    Graph g = *this;
    g.labels_ = std::make_shared<const std::vector<std::size_t>>(std::move(labels));
    g.validate();
    return g;
  }

  Graph with_features(std::vector<double> features) const {
    Graph g = *this;
    g.features_ = std::make_shared<const std::vector<double>>(std::move(features));
    g.validate();
    return g;
  }

  Graph with_name(std::string name) const {
    Graph g = *this;
    g.name_ = std::move(name);
    return g;
  }

  friend Graph add_self_loops(const Graph& g);

 private:
  void validate() const {
    if (features_->size() != n_ * d_) {
      throw StructureError("graph '" + name_ + "': " + std::to_string(features_->size()) +
                           " feature values for n*d=" + std::to_string(n_ * d_));
    }
    if (labels_->size() != n_) {
      throw StructureError("graph '" + name_ + "': " + std::to_string(labels_->size()) + " labels for " +
                           std::to_string(n_) + " nodes");
    }
    for (std::size_t i = 0; i < n_; ++i) {
      if ((*labels_)[i] >= c_) {
        throw StructureError("graph '" + name_ + "': label " + std::to_string((*labels_)[i]) + " of node " +
                             std::to_string(i) + " is not below c=" + std::to_string(c_));
      }
    }
    for (std::size_t r = 0; r < edges_.size(); ++r) {
      if (edges_[r].src >= n_ || edges_[r].dst >= n_) {
        throw StructureError("graph '" + name_ + "': edge " + std::to_string(r) + " (" +
                             std::to_string(edges_[r].src) + "," + std::to_string(edges_[r].dst) +
                             ") has an endpoint >= n=" + std::to_string(n_));
      }
    }
  }

  void finish() {
    csr_ = build_edge_index(n_, edges_);
    std::vector<bool> has(n_, false);
    for (const Edge& e : edges_)
      if (e.src == e.dst) has[e.src] = true;
    all_self_loops_ = std::all_of(has.begin(), has.end(), [](bool b) { return b; });
  }

  std::string name_;
  std::size_t n_ = 0, d_ = 0, c_ = 0;
  std::shared_ptr<const std::vector<double>> features_ = std::make_shared<const std::vector<double>>();
  std::vector<Edge> edges_;
  std::shared_ptr<const std::vector<std::size_t>> labels_ = std::make_shared<const std::vector<std::size_t>>();
  bool directed_ = false;
  bool self_loops_added_ = false;
  bool all_self_loops_ = false;
  EdgeIndex csr_;
};

/// Gives every node exactly one (i, i) edge. Existing edge order is kept,
/// duplicate self-loops are dropped and missing ones are appended in node order.
inline Graph add_self_loops(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<bool> seen(n, false);
  std::vector<Edge> edges;
  edges.reserve(g.num_edges() + n);
  for (const Edge& e : g.edges()) {
    if (e.src == e.dst) {
      if (seen[e.src]) continue;
      seen[e.src] = true;
    }
    edges.push_back(e);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
  }
  Graph out = g.with_edges(std::move(edges));
  out.self_loops_added_ = true;
  return out;
}

}  // namespace ccagnn
