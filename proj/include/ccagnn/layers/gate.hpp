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

#include "ccagnn/ops.hpp"
#include "ccagnn/parameters.hpp"

namespace ccagnn {

/// Affine map x W + b.
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng)
      : weight_(glorot_uniform(in, out, {in, out}, rng)), bias_(Tensor::zeros({out}, true)) {}

  Tensor operator()(const Tensor& x) const { return add_row(matmul(x, weight_), bias_); }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

  void register_parameters(ParameterList& params, const std::string& prefix) const {
    params.push_back({prefix + ".weight", weight_});
    params.push_back({prefix + ".bias", bias_});
  }

 private:
  Tensor weight_;
  Tensor bias_;
};

struct DisentangledRepresentation {
  /// Gate values in (0, 1), [n x d].
  Tensor gate;
  /// gate * h
  Tensor causal;
  /// (1 - gate) * h
  Tensor noncausal;
};

/// Learned feature-wise sigmoid gate splitting an embedding in two.
class FeatureGate {
 public:
  FeatureGate() = default;
  FeatureGate(std::size_t dim, Rng& rng) : affine_(dim, dim, rng) {}

  Tensor& weight() { return affine_.weight(); }
  Tensor& bias() { return affine_.bias(); }

  void register_parameters(ParameterList& params, const std::string& prefix) const {
    affine_.register_parameters(params, prefix);
  }

  DisentangledRepresentation operator()(const Tensor& h) const { return disentangle(h); }

  DisentangledRepresentation disentangle(const Tensor& h) const {
    Tensor g = sigmoid(affine_(h));
    return split(h, g);
  }

  /// Split with a caller-supplied gate (e.g. a constant 0.5 gate).
  static DisentangledRepresentation split(const Tensor& h, const Tensor& g) {
    return {g, mul(g, h), mul(one_minus(g), h)};
  }

 private:
  Linear affine_;
};

struct FusionResult {
  /// alpha * x_c + (1 - alpha) * x_o
  Tensor fused;
  /// Per-node weight in (0, 1), [n x 1].
  Tensor alpha;
  /// Pre-sigmoid score, [n x 1].
  Tensor logit;
};

/// Per-node scalar gate over the concatenated pathways.
class FusionGate {
 public:
  FusionGate() = default;
  FusionGate(std::size_t dim, Rng& rng) : head_(2 * dim, 1, rng) {}

  Tensor& weight() { return head_.weight(); }
  Tensor& bias() { return head_.bias(); }

  void register_parameters(ParameterList& params, const std::string& prefix) const {
    head_.register_parameters(params, prefix);
  }

  FusionResult operator()(const Tensor& x_c, const Tensor& x_o) const {
    detail::require_same_shape(x_c, x_o, "fuse");
    Tensor logit = head_(concat_cols(x_c, x_o));
    return combine(x_c, x_o, logit);
  }

  static FusionResult combine(const Tensor& x_c, const Tensor& x_o, const Tensor& logit) {
    Tensor alpha = sigmoid(logit);
    Tensor fused = add(mul_col(x_c, alpha), mul_col(x_o, one_minus(alpha)));
    return {fused, alpha, logit};
  }

 private:
  Linear head_;
};

/// Mean over rows of the squared cosine between x_c and x_o; zero rows give 0.
inline Tensor orthogonality_loss(const Tensor& x_c, const Tensor& x_o) {
  detail::require_same_shape(x_c, x_o, "orthogonality_loss");
  return mean(square(dot_rows(normalize_rows(x_c), normalize_rows(x_o))));
}

}  // namespace ccagnn
