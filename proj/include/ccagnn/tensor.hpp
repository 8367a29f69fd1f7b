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
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ccagnn {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input lies outside the domain of a function (e.g. log of 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for malformed index structures (unsorted segments, bad edge ids).
class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

namespace detail {

inline std::uint64_t next_tensor_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t id = next_tensor_id();
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape write gradients back into parameters. Use clone() for a deep
/// copy and detach() for a gradient-free copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(shape_size(shape), 0.0);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, double fill, bool requires_grad = false) {
    std::vector<double> v(shape_size(shape), fill);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (shape_size(shape) != values.size()) {
      throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                           std::to_string(shape_size(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    if (requires_grad) t.node_->grad.assign(t.node_->value.size(), 0.0);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  /// Column vector [values.size() x 1].
  static Tensor column(std::vector<double> values) {
    const std::size_t n = values.size();
    return from({n, 1}, std::move(values));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  /// Leading dimension; 1 for scalars.
  std::size_t rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
  /// Product of all trailing dimensions; 1 for vectors and scalars.
  std::size_t cols() const {
    std::size_t c = 1;
    for (std::size_t k = 1; k < node_->shape.size(); ++k) c *= node_->shape[k];
    return c;
  }

  std::span<const double> values() const { return node_->value; }
  std::span<double> values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad() { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  std::uint64_t id() const { return node_->id; }

  double item() const {
    if (size() != 1) {
      throw ContractError("item() on tensor of shape " + shape_str(shape()));
    }
    return node_->value[0];
  }

  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }

  void zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->value.size(), 0.0);
  }

  /// Value copy with no gradient tracking.
  Tensor detach() const { return from(shape(), node_->value, false); }

  /// Value copy that keeps the requires_grad flag (fresh leaf).
  Tensor clone() const { return from(shape(), node_->value, node_->requires_grad); }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

enum class OpKind {
  matmul,
  transpose,
  add,
  sub,
  mul,
  add_row,
  mul_col,
  scale,
  shift,
  unary,
  sum,
  mean,
  row_sum,
  log_softmax,
  logsumexp_rows,
  normalize_rows,
  concat_cols,
  slice_cols,
  gather_rows,
  pick,
  segment_sum,
  segment_softmax,
  head_dot,
  head_scale,
  head_mean,
  edge_scores,
  edge_aggregate,
  mask,
};

/// Define-by-run record of differentiable operations.
///
/// Operations record themselves onto the tape that is active on the calling
/// thread (see Tape::Scope). With no active tape, nothing is recorded and the
/// forward values are computed by exactly the same code path.
class Tape {
 public:
  struct Record {
    OpKind kind;
    std::vector<std::uint64_t> inputs;
    std::uint64_t output;
    std::function<void()> backward;
    std::shared_ptr<detail::TensorNode> out_node;
  };

  /// Activates a tape for the current thread; restores the previous on exit.
  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(current()) { current() = &tape; }
    ~Scope() { current() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  /// Suspends recording on the current thread (inference mode).
  class NoGrad {
   public:
    NoGrad() : previous_(current()) { current() = nullptr; }
    ~NoGrad() { current() = previous_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active() { return current(); }

  void record(OpKind kind, std::vector<std::uint64_t> inputs, const Tensor& out,
              std::function<void()> backward) {
    records_.push_back({kind, std::move(inputs), out.id(), std::move(backward), out.node()});
  }

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  /// Reverse traversal from a scalar loss.
  ///
  /// Intermediate gradients are reset on every call; leaf gradients
  /// accumulate until zeroed by the caller.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " +
                          (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    auto it = std::find_if(records_.begin(), records_.end(),
                           [&](const Record& r) { return r.output == loss.id(); });
    if (it == records_.end()) {
      throw ContractError("backward(): loss was not recorded on this tape");
    }
    for (auto& r : records_) {
      std::fill(r.out_node->grad.begin(), r.out_node->grad.end(), 0.0);
    }
    loss.node()->grad[0] = 1.0;
    const auto stop = static_cast<std::size_t>(std::distance(records_.begin(), it));
    for (std::size_t i = stop + 1; i-- > 0;) {
      records_[i].backward();
    }
  }

 private:
  static Tape*& current() {
    thread_local Tape* tape = nullptr;
    return tape;
  }

  std::vector<Record> records_;
};

namespace detail {

inline bool recording(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

inline void check_finite([[maybe_unused]] std::span<const double> v,
                         [[maybe_unused]] const char* where) {
#ifndef NDEBUG
  for (double x : v) {
    assert(std::isfinite(x) && where);
  }
#endif
}

/// Builds an op result; marks it differentiable when any input is tracked.
inline Tensor make_result(Shape shape, std::vector<double> values, bool tracked, const char* op) {
  check_finite(values, op);
  Tensor out = Tensor::from(std::move(shape), std::move(values), tracked);
  if (tracked) out.node()->leaf = false;
  return out;
}

inline void record(OpKind kind, std::initializer_list<const Tensor*> inputs, const Tensor& out,
                   std::function<void()> backward) {
  std::vector<std::uint64_t> ids;
  ids.reserve(inputs.size());
  for (const Tensor* t : inputs) ids.push_back(t->id());
  Tape::active()->record(kind, std::move(ids), out, std::move(backward));
}

}  // namespace detail

}  // namespace ccagnn
