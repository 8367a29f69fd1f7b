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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccagnn/tensor.hpp"

namespace ccagnn {

enum class F1Average { macro, micro, weighted };

inline F1Average parse_average(const std::string& s) {
  if (s == "macro") return F1Average::macro;
  if (s == "micro") return F1Average::micro;
  if (s == "weighted") return F1Average::weighted;
  throw std::invalid_argument("unknown F1 average '" + s + "' (expected macro, micro or weighted)");
}

/// F1 of every class; a class with no true and no predicted members scores 0.
inline std::vector<double> per_class_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                        std::size_t c) {
  if (preds.size() != labels.size()) throw ContractError("f1: prediction and label counts differ");
  if (preds.empty()) throw ContractError("f1: empty input");
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= c || labels[i] >= c) throw ContractError("f1: class index not below c");
    if (preds[i] == labels[i]) {
      ++tp[preds[i]];
    } else {
      ++fp[preds[i]];
      ++fn[labels[i]];
    }
  }
  std::vector<double> f1(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t denom = 2 * tp[k] + fp[k] + fn[k];
    if (denom) f1[k] = 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
  }
  return f1;
}

inline double f1_score(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t c,
                       F1Average average = F1Average::macro) {
  const auto f1 = per_class_f1(preds, labels, c);
  if (average == F1Average::micro) {
    // Single-label micro F1 reduces to accuracy.
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(preds.size());
  }
  if (average == F1Average::weighted) {
    std::vector<std::size_t> support(c, 0);
    for (std::size_t y : labels) ++support[y];
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += f1[k] * static_cast<double>(support[k]);
    return s / static_cast<double>(labels.size());
  }
  double s = 0.0;
  for (double v : f1) s += v;
  return s / static_cast<double>(c);
}

inline double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t c) {
  return f1_score(preds, labels, c, F1Average::macro);
}

/// Row-wise argmax of an [n x c] tensor; ties go to the lowest index.
inline std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.rows(), c = logits.cols();
  auto v = logits.values();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = v.subspan(i * c, c);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace ccagnn
