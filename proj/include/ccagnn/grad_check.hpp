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
#include <functional>
#include <string>
#include <vector>

#include "ccagnn/parameters.hpp"
#include "ccagnn/tensor.hpp"

namespace ccagnn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
/// to round-off from reading as large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares tape gradients of a scalar function against central differences.
///
/// `loss` must be deterministic and read the current values of `params`.
/// Each element is perturbed by +/- step in turn and restored afterwards.
inline GradCheckReport grad_check(const std::function<Tensor()>& loss, ParameterList params,
                                  double step = 1e-4, double tolerance = 1e-4) {
  GradCheckReport report;
  report.tolerance = tolerance;
  zero_grads(params);
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor l = loss();
    tape.backward(l);
  }
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto values = p.tensor.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      double plus = 0.0, minus = 0.0;
      {
        Tape::NoGrad ng;
        values[i] = original + step;
        plus = loss().item();
        values[i] = original - step;
        minus = loss().item();
        values[i] = original;
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric);
      if (i == 0 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst = entry.name;
    }
    report.entries.push_back(std::move(entry));
  }
  zero_grads(params);
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace ccagnn
