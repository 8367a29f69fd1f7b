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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccagnn/bundle.hpp"
#include "ccagnn/loss.hpp"
#include "ccagnn/model.hpp"

namespace ccagnn {

inline nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["in_dim"] = c.in_dim;
  j["num_classes"] = c.num_classes;
  j["heads"] = c.heads;
  j["head_dim"] = c.head_dim;
  j["encoder_layers"] = c.encoder_layers;
  j["negative_slope"] = c.negative_slope;
  j["scoring"] = c.scoring == AttentionScoring::gatv2 ? "gatv2" : "gat";
  j["learned_gate"] = c.learned_gate;
  j["baseline"] = c.baseline;
  j["mi_hidden"] = c.mi.hidden;
  j["mi_proj_dim"] = c.mi.proj_dim;
  j["mi_temperature"] = c.mi.temperature;
  j["mi_queue"] = c.mi.queue_capacity;
  j["mi_class_queue"] = c.mi.class_queue_capacity;
  j["mi_shared_encoder"] = c.mi.shared_encoder;
  j["mi_batch"] = c.mi_batch;
  j["contrastive_temperature"] = c.contrastive_temperature;
  j["center_decay"] = c.center_decay;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.in_dim = j.at("in_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.head_dim = j.at("head_dim").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.negative_slope = j.at("negative_slope").get<double>();
  c.scoring = j.at("scoring").get<std::string>() == "gat" ? AttentionScoring::gat : AttentionScoring::gatv2;
  c.learned_gate = j.at("learned_gate").get<bool>();
  c.baseline = j.at("baseline").get<bool>();
  c.mi.hidden = j.at("mi_hidden").get<std::size_t>();
  c.mi.proj_dim = j.at("mi_proj_dim").get<std::size_t>();
  c.mi.temperature = j.at("mi_temperature").get<double>();
  c.mi.queue_capacity = j.at("mi_queue").get<std::size_t>();
  c.mi.class_queue_capacity = j.at("mi_class_queue").get<std::size_t>();
  c.mi.shared_encoder = j.at("mi_shared_encoder").get<bool>();
  c.mi_batch = j.at("mi_batch").get<std::size_t>();
  c.contrastive_temperature = j.at("contrastive_temperature").get<double>();
  c.center_decay = j.at("center_decay").get<double>();
  return c;
}

inline nlohmann::json to_json(const LossWeights& w) {
  return {{"ce_causal", w.ce_causal}, {"ce_fusion", w.ce_fusion}, {"ce_intervention", w.ce_intervention},
          {"ce_noncausal", w.ce_noncausal}, {"mi", w.mi}, {"cond_mi", w.cond_mi}, {"pred_mi", w.pred_mi},
          {"inv_mi", w.inv_mi}, {"orth", w.orth}, {"contrastive", w.contrastive}, {"center", w.center},
          {"adaptive", w.adaptive}, {"gate_conf", w.gate_conf}};
}

inline LossWeights loss_weights_from_json(const nlohmann::json& j) {
  LossWeights w;
  w.ce_causal = j.at("ce_causal").get<double>();
  w.ce_fusion = j.at("ce_fusion").get<double>();
  w.ce_intervention = j.at("ce_intervention").get<double>();
  w.ce_noncausal = j.at("ce_noncausal").get<double>();
  w.mi = j.at("mi").get<double>();
  w.cond_mi = j.at("cond_mi").get<double>();
  w.pred_mi = j.at("pred_mi").get<double>();
  w.inv_mi = j.at("inv_mi").get<double>();
  w.orth = j.at("orth").get<double>();
  w.contrastive = j.at("contrastive").get<double>();
  w.center = j.at("center").get<double>();
  w.adaptive = j.at("adaptive").get<double>();
  w.gate_conf = j.at("gate_conf").get<double>();
  return w;
}

struct Checkpoint {
  CCAGNNModel model;
  LossWeights weights;
  /// Everything meta.json holds, including caller-supplied fields.
  nlohmann::json meta;
};

/// Writes meta.json and params.f64 (parameters concatenated in registration
/// order as little-endian doubles). `extra` keys are merged into meta.json.
inline void save_checkpoint(const CCAGNNModel& model, const LossWeights& weights, const std::filesystem::path& dir,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = extra;
  meta["format"] = "ccagnn-checkpoint";
  meta["version"] = 1;
  meta["model"] = to_json(model.config());
  meta["weights"] = to_json(weights);
  nlohmann::json order = nlohmann::json::array();
  std::vector<double> flat;
  for (const auto& p : model.parameters()) {
    order.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    flat.insert(flat.end(), p.tensor.values().begin(), p.tensor.values().end());
  }
  meta["parameters"] = order;
  const std::string text = meta.dump(2) + "\n";
  detail::write_file(dir / "meta.json", text.data(), text.size());
  detail::write_file(dir / "params.f64", flat.data(), flat.size() * sizeof(double));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  const auto raw = detail::read_file(meta_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(meta_path.string(), 0, std::string("malformed JSON: ") + e.what());
  }
  if (meta.value("format", "") != "ccagnn-checkpoint") {
    throw LoadError(meta_path.string(), 0, "not a ccagnn checkpoint");
  }
  Checkpoint ck;
  try {
    ck.model = CCAGNNModel(model_config_from_json(meta.at("model")), 0);
    ck.weights = loss_weights_from_json(meta.at("weights"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(meta_path.string(), 0, std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto params_path = dir / "params.f64";
  const auto bytes = detail::read_file(params_path);
  auto& params = ck.model.parameters();
  const auto& order = meta.at("parameters");
  if (order.size() != params.size()) {
    throw LoadError(meta_path.string(), 0, "parameter list does not match the recorded architecture");
  }
  std::size_t expected = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (order[k].at("name").get<std::string>() != params[k].name) {
      throw LoadError(meta_path.string(), 0, "parameter " + std::to_string(k) + " is '" +
                                                 order[k].at("name").get<std::string>() + "', expected '" +
                                                 params[k].name + "'");
    }
    expected += params[k].tensor.size() * sizeof(double);
  }
  detail::expect_bytes(params_path, bytes.size(), expected);
  std::size_t offset = 0;
  for (auto& p : params) {
    auto v = p.tensor.values();
    std::memcpy(v.data(), bytes.data() + offset, v.size() * sizeof(double));
    offset += v.size() * sizeof(double);
  }
  ck.meta = std::move(meta);
  return ck;
}

}  // namespace ccagnn
