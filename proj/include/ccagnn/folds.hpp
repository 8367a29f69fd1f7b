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
#include <string>
#include <vector>

#include "ccagnn/graph.hpp"
#include "ccagnn/random.hpp"

namespace ccagnn {

class StratificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct FoldPlan {
  std::size_t k = 0;
  std::vector<Fold> folds;
  bool stratified = true;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
};

/// Node-level k-fold split.
///
/// Stratified mode shuffles each class, lays the classes end to end and deals
/// positions round-robin into folds, so class proportions and fold sizes both
/// differ by at most one. Inside each fold, val_fraction of every class's
/// non-test nodes (rounded) goes to validation.
inline FoldPlan make_folds(const Graph& g, std::size_t k, double val_fraction = 0.2, std::uint64_t seed = 0,
                           bool allow_unstratified = false) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be at least 2, got " + std::to_string(k));
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("make_folds: val_fraction must lie in [0, 1)");
  }
  const std::size_t n = g.num_nodes(), c = g.num_classes();
  if (n < k) throw std::invalid_argument("make_folds: fewer nodes than folds");

  std::vector<std::vector<std::size_t>> by_class(c);
  for (std::size_t i = 0; i < n; ++i) by_class[g.labels()[i]].push_back(i);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.val_fraction = val_fraction;
  plan.stratified = true;
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (!by_class[cls].empty() && by_class[cls].size() < k) {
      if (!allow_unstratified) {
        throw StratificationError("make_folds: class " + std::to_string(cls) + " has " +
                                  std::to_string(by_class[cls].size()) + " members, fewer than k=" +
                                  std::to_string(k));
      }
      plan.stratified = false;
    }
  }

  Rng rng(derive_seed(seed, 0x666f6c64));
  std::vector<std::size_t> order;
  order.reserve(n);
  if (plan.stratified) {
    for (auto& members : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::size_t> fold_of(n);
  for (std::size_t p = 0; p < n; ++p) fold_of[order[p]] = p % k;

  plan.folds.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    Fold& fold = plan.folds[f];
    Rng frng(derive_seed(seed, 0x76616c, f));
    std::vector<std::vector<std::size_t>> rest(plan.stratified ? c : 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) {
        fold.test.push_back(i);
      } else {
        rest[plan.stratified ? g.labels()[i] : 0].push_back(i);
      }
    }
    for (auto& members : rest) {
      std::shuffle(members.begin(), members.end(), frng);
      const auto nval = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(members.size())));
      fold.val.insert(fold.val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(nval));
      fold.train.insert(fold.train.end(), members.begin() + static_cast<std::ptrdiff_t>(nval), members.end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.val.begin(), fold.val.end());
  }
  return plan;
}

}  // namespace ccagnn
