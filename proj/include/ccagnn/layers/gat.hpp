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

#include <string>

#include "ccagnn/graph.hpp"
#include "ccagnn/ops.hpp"
#include "ccagnn/parameters.hpp"

namespace ccagnn {

enum class AttentionScoring {
  /// a . LeakyReLU(W h_i + W h_j)
  gatv2,
  /// LeakyReLU(a . [W h_i || W h_j])
  gat,
};

struct GATConfig {
  std::size_t in_dim = 0;
  /// Width of each head.
  std::size_t out_dim = 16;
  std::size_t heads = 4;
  bool concat = true;
  double negative_slope = 0.2;
  AttentionScoring scoring = AttentionScoring::gatv2;
  /// Apply ELU to the aggregated output.
  bool activate = true;

  std::size_t output_width() const { return concat ? heads * out_dim : out_dim; }
};

/// Multi-head graph attention convolution over incoming edges.
class GATLayer {
 public:
  struct Output {
    Tensor h;
    /// Attention per CSR edge and head, [E x heads]; each target's rows sum to 1.
    Tensor attention;
  };

  GATLayer() = default;

  GATLayer(const GATConfig& config, Rng& rng) : config_(config) {
    const std::size_t width = config.heads * config.out_dim;
    weight_ = glorot_uniform(config.in_dim, width, {config.in_dim, width}, rng);
    const std::size_t att = config.scoring == AttentionScoring::gatv2 ? width : 2 * width;
    attention_ = glorot_uniform(config.out_dim, 1, {1, att}, rng);
  }

  const GATConfig& config() const { return config_; }
  Tensor& weight() { return weight_; }
  Tensor& attention() { return attention_; }

  void register_parameters(ParameterList& params, const std::string& prefix) const {
    params.push_back({prefix + ".weight", weight_});
    params.push_back({prefix + ".attention", attention_});
  }

  Output forward(const Tensor& h, const Graph& g) const {
    if (!g.has_self_loops()) {
      throw ContractError("GAT forward on graph '" + g.name() +
                          "' without self-loops; call add_self_loops first");
    }
    if (h.rank() != 2 || h.shape()[1] != config_.in_dim || h.shape()[0] != g.num_nodes()) {
      throw DimensionError("GAT forward: input " + shape_str(h.shape()) + ", layer expects [" +
                           std::to_string(g.num_nodes()) + "x" + std::to_string(config_.in_dim) + "]");
    }
    const EdgeIndex& csr = g.csr();
    const std::size_t width = config_.heads * config_.out_dim;
    Tensor wh = matmul(h, weight_);
    Tensor scores;
    if (config_.scoring == AttentionScoring::gatv2) {
      scores = edge_scores(wh, attention_, csr.sources, csr.targets, config_.heads, config_.negative_slope);
    } else {
      // Original scoring splits a into target and source halves, so both
      // projections can be taken per node before gathering onto edges.
      Tensor a_target = slice_cols(attention_, 0, width);
      Tensor a_source = slice_cols(attention_, width, 2 * width);
      scores = leaky_relu(add(gather_rows(head_dot(wh, a_target, config_.heads), csr.targets),
                              gather_rows(head_dot(wh, a_source, config_.heads), csr.sources)),
                          config_.negative_slope);
    }
    Tensor alpha = segment_softmax(scores, csr.targets);
    Tensor out = edge_aggregate(wh, alpha, csr.sources, csr.targets, g.num_nodes());
    if (!config_.concat) out = head_mean(out, config_.heads);
    if (config_.activate) out = elu(out);
    return {out, alpha};
  }

 private:
  GATConfig config_;
  Tensor weight_;
  Tensor attention_;
};

}  // namespace ccagnn
