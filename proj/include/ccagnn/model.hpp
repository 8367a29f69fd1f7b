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

#include "ccagnn/augment.hpp"
#include "ccagnn/graph.hpp"
#include "ccagnn/layers/gat.hpp"
#include "ccagnn/layers/gate.hpp"
#include "ccagnn/layers/mi.hpp"
#include "ccagnn/parameters.hpp"

namespace ccagnn {

enum class Variant { full, basic_mi, no_learned_gate, no_custom_loss, gatv1 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::basic_mi: return "basic_mi";
    case Variant::no_learned_gate: return "no_learned_gate";
    case Variant::no_custom_loss: return "no_custom_loss";
    case Variant::gatv1: return "gatv1";
  }
  return "?";
}

inline std::vector<Variant> all_variants() {
  return {Variant::full, Variant::basic_mi, Variant::no_learned_gate, Variant::no_custom_loss, Variant::gatv1};
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : all_variants())
    if (s == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant '" + s +
                              "' (expected full, basic_mi, no_learned_gate, no_custom_loss or gatv1)");
}

/// Weights of the total loss, in the order the components are logged.
struct LossWeights {
  double ce_causal = 0.5;
  double ce_fusion = 1.0;
  double ce_intervention = 0.5;
  double ce_noncausal = 0.1;
  double mi = 0.1;
  double cond_mi = 0.1;
  double pred_mi = 0.1;
  double inv_mi = 0.1;
  double orth = 0.1;
  double contrastive = 0.05;
  double center = 0.05;
  /// Depth of the linear ramp on the intervention and MI weights: 0 disables
  /// it, 1 starts those weights at zero.
  double adaptive = 1.0;
  double gate_conf = 0.1;

  static LossWeights fusion_only() {
    LossWeights w;
    w.ce_causal = w.ce_intervention = w.ce_noncausal = w.mi = w.cond_mi = w.pred_mi = w.inv_mi = w.orth =
        w.contrastive = w.center = w.adaptive = w.gate_conf = 0.0;
    w.ce_fusion = 1.0;
    return w;
  }

  void validate() const {
    for (double v : {ce_causal, ce_fusion, ce_intervention, ce_noncausal, mi, cond_mi, pred_mi, inv_mi, orth,
                     contrastive, center, gate_conf}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
    }
    if (!(adaptive >= 0.0 && adaptive <= 1.0)) throw std::invalid_argument("adaptive weight must lie in [0, 1]");
  }

  /// Multiplier on the intervention and MI weights at training progress r in [0, 1].
  double ramp(double progress) const { return 1.0 - adaptive * (1.0 - std::clamp(progress, 0.0, 1.0)); }
};

struct ModelConfig {
  std::size_t in_dim = 0;
  std::size_t num_classes = 0;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t encoder_layers = 2;
  double negative_slope = 0.2;
  AttentionScoring scoring = AttentionScoring::gatv2;
  /// False fixes the feature gate, the fusion weight and the intervention weight at 0.5.
  bool learned_gate = true;
  /// Plain attention network: encoder and classifier only, one cross-entropy term.
  bool baseline = false;
  MIConfig mi;
  /// Nodes sampled per step for the MI terms.
  std::size_t mi_batch = 256;
  double contrastive_temperature = 0.1;
  double center_decay = 0.9;

  std::size_t hidden() const { return heads * head_dim; }

  void validate() const {
    if (in_dim == 0) throw std::invalid_argument("model input width must be positive");
    if (num_classes < 2) throw std::invalid_argument("model needs at least two classes");
    if (heads == 0 || head_dim == 0 || encoder_layers == 0) {
      throw std::invalid_argument("heads, head width and encoder depth must be positive");
    }
    if (!(negative_slope >= 0.0 && negative_slope < 1.0)) throw std::invalid_argument("negative slope must lie in [0, 1)");
    if (mi_batch < 2) throw std::invalid_argument("MI batch must hold at least two nodes");
    if (mi.queue_capacity == 0 || mi.class_queue_capacity == 0 || mi.proj_dim == 0 || mi.hidden == 0) {
      throw std::invalid_argument("MI queue capacities and widths must be positive");
    }
    if (!(contrastive_temperature > 0.0)) throw std::invalid_argument("contrastive temperature must be positive");
    if (!(center_decay >= 0.0 && center_decay < 1.0)) throw std::invalid_argument("center decay must lie in [0, 1)");
  }
};

/// Applies an ablation variant on top of a base configuration.
inline void apply_variant(Variant v, ModelConfig& config, LossWeights& weights) {
  switch (v) {
    case Variant::full: break;
    case Variant::basic_mi:
      config.mi.shared_encoder = true;
      weights.cond_mi = 0.0;
      break;
    case Variant::no_learned_gate: config.learned_gate = false; break;
    case Variant::no_custom_loss:
      weights.contrastive = 0.0;
      weights.center = 0.0;
      weights.adaptive = 0.0;
      break;
    case Variant::gatv1: config.scoring = AttentionScoring::gat; break;
  }
}

struct ForwardOutput {
  /// Clean node features; a gradient leaf during training.
  Tensor input;
  /// Encoder output of the view the branches read.
  Tensor hidden;
  /// Last encoder layer's attention on the clean graph, CSR order.
  Tensor attention;
  DisentangledRepresentation rep;
  /// Pathway convolution outputs.
  Tensor x_c, x_o;
  /// Causal pathway output on the clean view (equals x_c outside training).
  Tensor clean_x_c;
  FusionResult fusion;
  Tensor alpha_int;
  std::vector<std::size_t> permutation;
  Tensor causal_logits, noncausal_logits, fusion_logits, intervention_logits;
};

/// Intervention mix alpha * x_c[perm] + (1 - alpha) * x_o for a [1 x 1] alpha.
inline Tensor counterfactual_mix(const Tensor& x_c, const Tensor& x_o, std::span<const std::size_t> perm,
                                 const Tensor& alpha) {
  detail::require_same_shape(x_c, x_o, "counterfactual_mix");
  if (perm.size() != x_c.rows()) throw DimensionError("counterfactual_mix: permutation length mismatch");
  std::vector<std::size_t> zeros(x_c.rows(), 0);
  Tensor a = gather_rows(alpha, zeros);
  return add(mul_col(gather_rows(x_c, perm), a), mul_col(x_o, one_minus(a)));
}

class CCAGNNModel {
 public:
  CCAGNNModel() = default;

  CCAGNNModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config.validate();
    Rng rng(derive_seed(seed, 0x696e6974));
    const std::size_t hid = config.hidden();
    for (std::size_t l = 0; l < config.encoder_layers; ++l) {
      GATConfig gc;
      gc.in_dim = l == 0 ? config.in_dim : hid;
      gc.out_dim = config.head_dim;
      gc.heads = config.heads;
      gc.negative_slope = config.negative_slope;
      gc.scoring = config.scoring;
      encoder_.emplace_back(gc, rng);
    }
    if (!config.baseline) {
      gate_ = FeatureGate(hid, rng);
      GATConfig pc;
      pc.in_dim = hid;
      pc.out_dim = config.head_dim;
      pc.heads = config.heads;
      pc.negative_slope = config.negative_slope;
      pc.scoring = config.scoring;
      causal_conv_ = GATLayer(pc, rng);
      noncausal_conv_ = GATLayer(pc, rng);
      fusion_ = FusionGate(hid, rng);
      intervention_logit_ = Tensor::zeros({1, 1}, true);
    }
    classifier_ = Linear(hid, config.num_classes, rng);
    if (!config.baseline) {
      mi_ = MIEstimator(hid, config.num_classes, config.mi, rng);
      prototypes_ = glorot_uniform(config.mi.proj_dim, config.num_classes, {config.num_classes, config.mi.proj_dim}, rng);
    }
    centers_.assign(config.num_classes * hid, 0.0);
    register_all();
  }

  const ModelConfig& config() const { return config_; }
  ParameterList& parameters() { return params_; }
  const ParameterList& parameters() const { return params_; }

  std::vector<GATLayer>& encoder() { return encoder_; }
  FeatureGate& gate() { return gate_; }
  GATLayer& causal_conv() { return causal_conv_; }
  GATLayer& noncausal_conv() { return noncausal_conv_; }
  FusionGate& fusion() { return fusion_; }
  Linear& classifier() { return classifier_; }
  MIEstimator& mi() { return mi_; }
  Tensor& intervention_logit() { return intervention_logit_; }
  Tensor& prototypes() { return prototypes_; }

  std::vector<double>& centers() { return centers_; }
  bool centers_ready() const { return centers_ready_; }
  void set_centers_ready(bool v) { centers_ready_ = v; }
  bool mi_warm() const { return mi_warm_; }
  void set_mi_warm(bool v) { mi_warm_ = v; }

  /// Clears queues and class centers.
  void reset_state() {
    if (!config_.baseline) {
      mi_.queue().clear();
      for (std::size_t k = 0; k < mi_.num_classes(); ++k) mi_.class_queue(k).clear();
    }
    centers_.assign(centers_.size(), 0.0);
    centers_ready_ = false;
    mi_warm_ = false;
  }

  /// sigmoid of the intervention score, or a constant 0.5 without learned gates.
  Tensor alpha_int() const {
    if (!config_.learned_gate) return Tensor::full({1, 1}, 0.5);
    return sigmoid(intervention_logit_);
  }

  struct Encoded {
    Tensor h;
    Tensor attention;
  };

  Encoded encode(const Tensor& x, const Graph& g) const {
    Encoded e{x, Tensor()};
    for (const auto& layer : encoder_) {
      auto out = layer.forward(e.h, g);
      e.h = out.h;
      e.attention = out.attention;
    }
    return e;
  }

  DisentangledRepresentation disentangle(const Tensor& h) const {
    if (!config_.learned_gate) return FeatureGate::split(h, Tensor::full(h.shape(), 0.5));
    return gate_.disentangle(h);
  }

  FusionResult fuse(const Tensor& x_c, const Tensor& x_o) const {
    if (!config_.learned_gate) return FusionGate::combine(x_c, x_o, Tensor::zeros({x_c.rows(), 1}));
    return fusion_(x_c, x_o);
  }

  Tensor classify(const Tensor& x) const { return classifier_(x); }

  /// Intervention logits with a uniform permutation drawn from perm_seed.
  Tensor counterfactual_intervene(const Tensor& x_c, const Tensor& x_o, std::uint64_t perm_seed) const {
    const auto perm = random_permutation(x_c.rows(), perm_seed);
    return classify(counterfactual_mix(x_c, x_o, perm, alpha_int()));
  }

  /// Runs every branch. Outside training, augmentations are skipped and the
  /// result depends only on parameters, graph and step_seed (which picks the
  /// intervention permutation). mask_importance is [n x d] in [0, 1] or empty.
  ForwardOutput forward(const Graph& g, const AugmentationConfig& aug, bool training, std::uint64_t step_seed,
                        std::span<const double> mask_importance = {}) const {
    if (g.num_features() != config_.in_dim) {
      throw DimensionError("graph '" + g.name() + "' has " + std::to_string(g.num_features()) +
                           " features, model expects " + std::to_string(config_.in_dim));
    }
    ForwardOutput out;
    out.input = g.feature_tensor(training);
    Encoded clean = encode(out.input, g);
    out.attention = clean.attention;
    if (config_.baseline) {
      out.hidden = clean.h;
      out.causal_logits = out.fusion_logits = classify(clean.h);
      return out;
    }

    const Graph* view = &g;
    Graph augmented;
    Tensor h = clean.h;
    bool same_view = true;
    if (training) {
      Tensor x = out.input;
      if (aug.mask && aug.mask_rate > 0.0) {
        x = augment_mask(x, mask_importance, aug.mask_rate, derive_seed(step_seed, 0x6d61736b));
      }
      if (aug.edges && (aug.edge_drop_rate > 0.0 || aug.edge_add_rate > 0.0)) {
        augmented = augment_edges(g, aug.edge_drop_rate, aug.edge_add_rate, derive_seed(step_seed, 0x65646765));
        view = &augmented;
      }
      if (x.id() != out.input.id() || view != &g) {
        h = encode(x, *view).h;
        same_view = false;
      }
      if (aug.noise && aug.noise_scale > 0.0) {
        const auto importance = attention_importance(clean.attention, g.csr(), g.num_nodes());
        h = augment_noise(h, importance, aug.noise_scale, derive_seed(step_seed, 0x6e6f6973));
        same_view = false;
      }
    }
    out.hidden = h;
    out.rep = disentangle(h);
    out.x_c = causal_conv_.forward(out.rep.causal, *view).h;
    out.x_o = noncausal_conv_.forward(out.rep.noncausal, *view).h;
    out.clean_x_c = same_view ? out.x_c : causal_conv_.forward(disentangle(clean.h).causal, g).h;
    out.fusion = fuse(out.x_c, out.x_o);
    out.alpha_int = alpha_int();
    out.permutation = random_permutation(g.num_nodes(), derive_seed(step_seed, 0x7065726d));
    out.causal_logits = classify(out.x_c);
    out.noncausal_logits = classify(out.x_o);
    out.fusion_logits = classify(out.fusion.fused);
    out.intervention_logits = classify(counterfactual_mix(out.x_c, out.x_o, out.permutation, out.alpha_int));
    return out;
  }

  /// Inference forward; fusion logits are the model's prediction.
  ForwardOutput predict(const Graph& g) const { return forward(g, AugmentationConfig::none(), false, 0); }

 private:
  void register_all() {
    params_.clear();
    for (std::size_t l = 0; l < encoder_.size(); ++l) encoder_[l].register_parameters(params_, "encoder." + std::to_string(l));
    if (!config_.baseline) {
      gate_.register_parameters(params_, "gate");
      causal_conv_.register_parameters(params_, "causal_conv");
      noncausal_conv_.register_parameters(params_, "noncausal_conv");
      fusion_.register_parameters(params_, "fusion");
      params_.push_back({"intervention", intervention_logit_});
    }
    classifier_.register_parameters(params_, "classifier");
    if (!config_.baseline) {
      mi_.register_parameters(params_, "mi");
      params_.push_back({"prototypes", prototypes_});
    }
  }

  ModelConfig config_;
  std::vector<GATLayer> encoder_;
  FeatureGate gate_;
  GATLayer causal_conv_;
  GATLayer noncausal_conv_;
  FusionGate fusion_;
  Tensor intervention_logit_;
  Linear classifier_;
  MIEstimator mi_;
  Tensor prototypes_;
  ParameterList params_;
  std::vector<double> centers_;
  bool centers_ready_ = false;
  bool mi_warm_ = false;
};

}  // namespace ccagnn
