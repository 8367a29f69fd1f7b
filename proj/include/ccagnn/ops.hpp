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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ccagnn/tensor.hpp"

namespace ccagnn {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline ConstMatrixMap cmap(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return ConstMatrixMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

inline MatrixMap mmap(std::vector<double>& v, std::size_t r, std::size_t c) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

inline bool tracks(const std::shared_ptr<TensorNode>& n) { return n->requires_grad; }

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto an = a.node(), bn = b.node();
  if (m && n && k) {
    detail::mmap(out, m, n).noalias() = detail::cmap(an->value, m, k) * detail::cmap(bn->value, k, n);
  }
  const bool rec = detail::recording({&a, &b});
  Tensor c = detail::make_result({m, n}, std::move(out), rec, "matmul");
  if (rec) {
    detail::record(OpKind::matmul, {&a, &b}, c, [an, bn, cn = c.node(), m, k, n] {
      if (!(m && n && k)) return;
      auto dc = detail::cmap(cn->grad, m, n);
      if (detail::tracks(an)) {
        detail::mmap(an->grad, m, k).noalias() += dc * detail::cmap(bn->value, k, n).transpose();
      }
      if (detail::tracks(bn)) {
        detail::mmap(bn->grad, k, n).noalias() += detail::cmap(an->value, m, k).transpose() * dc;
      }
    });
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank2(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  auto an = a.node();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = an->value[i * n + j];
  const bool rec = detail::recording({&a});
  Tensor t = detail::make_result({n, m}, std::move(out), rec, "transpose");
  if (rec) {
    detail::record(OpKind::transpose, {&a}, t, [an, tn = t.node(), m, n] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += tn->grad[j * m + i];
    });
  }
  return t;
}

// ---------------------------------------------------------------------------
// Elementwise binary
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto an = a.node(), bn = b.node();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + bn->value[i];
  const bool rec = detail::recording({&a, &b});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "add");
  if (rec) {
    detail::record(OpKind::add, {&a, &b}, c, [an, bn, cn = c.node()] {
      for (std::size_t i = 0; i < cn->grad.size(); ++i) {
        if (detail::tracks(an)) an->grad[i] += cn->grad[i];
        if (detail::tracks(bn)) bn->grad[i] += cn->grad[i];
      }
    });
  }
  return c;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto an = a.node(), bn = b.node();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] - bn->value[i];
  const bool rec = detail::recording({&a, &b});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "sub");
  if (rec) {
    detail::record(OpKind::sub, {&a, &b}, c, [an, bn, cn = c.node()] {
      for (std::size_t i = 0; i < cn->grad.size(); ++i) {
        if (detail::tracks(an)) an->grad[i] += cn->grad[i];
        if (detail::tracks(bn)) bn->grad[i] -= cn->grad[i];
      }
    });
  }
  return c;
}

/// Hadamard product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto an = a.node(), bn = b.node();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * bn->value[i];
  const bool rec = detail::recording({&a, &b});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "mul");
  if (rec) {
    detail::record(OpKind::mul, {&a, &b}, c, [an, bn, cn = c.node()] {
      for (std::size_t i = 0; i < cn->grad.size(); ++i) {
        if (detail::tracks(an)) an->grad[i] += cn->grad[i] * bn->value[i];
        if (detail::tracks(bn)) bn->grad[i] += cn->grad[i] * an->value[i];
      }
    });
  }
  return c;
}

/// a[n x d] + bias broadcast over rows; bias holds d values.
inline Tensor add_row(const Tensor& a, const Tensor& bias) {
  const std::size_t n = a.rows(), d = a.cols();
  if (bias.size() != d) {
    throw DimensionError("add_row: bias " + shape_str(bias.shape()) + " does not match row width of " +
                         shape_str(a.shape()));
  }
  std::vector<double> out(a.size());
  auto an = a.node(), bn = bias.node();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = an->value[i * d + j] + bn->value[j];
  const bool rec = detail::recording({&a, &bias});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "add_row");
  if (rec) {
    detail::record(OpKind::add_row, {&a, &bias}, c, [an, bn, cn = c.node(), n, d] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double g = cn->grad[i * d + j];
          if (detail::tracks(an)) an->grad[i * d + j] += g;
          if (detail::tracks(bn)) bn->grad[j] += g;
        }
    });
  }
  return c;
}

/// a[n x d] scaled row-wise by s (n values).
inline Tensor mul_col(const Tensor& a, const Tensor& s) {
  const std::size_t n = a.rows(), d = a.cols();
  if (s.size() != n) {
    throw DimensionError("mul_col: scale " + shape_str(s.shape()) + " does not match rows of " +
                         shape_str(a.shape()));
  }
  std::vector<double> out(a.size());
  auto an = a.node(), sn = s.node();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = an->value[i * d + j] * sn->value[i];
  const bool rec = detail::recording({&a, &s});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "mul_col");
  if (rec) {
    detail::record(OpKind::mul_col, {&a, &s}, c, [an, sn, cn = c.node(), n, d] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double g = cn->grad[i * d + j];
          if (detail::tracks(an)) an->grad[i * d + j] += g * sn->value[i];
          if (detail::tracks(sn)) sn->grad[i] += g * an->value[i * d + j];
        }
    });
  }
  return c;
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  auto an = a.node();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * factor;
  const bool rec = detail::recording({&a});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "scale");
  if (rec) {
    detail::record(OpKind::scale, {&a}, c, [an, cn = c.node(), factor] {
      for (std::size_t i = 0; i < cn->grad.size(); ++i) an->grad[i] += cn->grad[i] * factor;
    });
  }
  return c;
}

inline Tensor shift(const Tensor& a, double offset) {
  std::vector<double> out(a.size());
  auto an = a.node();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + offset;
  const bool rec = detail::recording({&a});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "shift");
  if (rec) {
    detail::record(OpKind::shift, {&a}, c, [an, cn = c.node()] {
      for (std::size_t i = 0; i < cn->grad.size(); ++i) an->grad[i] += cn->grad[i];
    });
  }
  return c;
}

/// Multiplies by a constant mask (no gradient into the mask).
inline Tensor apply_mask(const Tensor& a, std::vector<double> m) {
  if (m.size() != a.size()) {
    throw DimensionError("apply_mask: mask of " + std::to_string(m.size()) + " values for tensor " +
                         shape_str(a.shape()));
  }
  std::vector<double> out(a.size());
  auto an = a.node();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * m[i];
  const bool rec = detail::recording({&a});
  Tensor c = detail::make_result(a.shape(), std::move(out), rec, "mask");
  if (rec) {
    detail::record(OpKind::mask, {&a}, c, [an, cn = c.node(), m = std::move(m)] {
      for (std::size_t i = 0; i < cn->grad.size(); ++i) an->grad[i] += cn->grad[i] * m[i];
    });
  }
  return c;
}

// ---------------------------------------------------------------------------
// Elementwise unary
// ---------------------------------------------------------------------------

enum class Unary { sigmoid, exp, log, elu, leaky_relu, tanh, softplus, square, sqrt };

inline const char* unary_name(Unary k) {
  switch (k) {
    case Unary::sigmoid: return "sigmoid";
    case Unary::exp: return "exp";
    case Unary::log: return "log";
    case Unary::elu: return "elu";
    case Unary::leaky_relu: return "leaky_relu";
    case Unary::tanh: return "tanh";
    case Unary::softplus: return "softplus";
    case Unary::square: return "square";
    case Unary::sqrt: return "sqrt";
  }
  return "?";
}

/// Applies an elementwise function. `param` is the LeakyReLU negative slope.
inline Tensor elementwise(Unary kind, const Tensor& x, double param = 0.2) {
  auto xn = x.node();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xn->value[i];
    switch (kind) {
      case Unary::sigmoid: out[i] = detail::stable_sigmoid(v); break;
      case Unary::exp: out[i] = std::exp(v); break;
      case Unary::log:
        if (!(v > 0.0)) {
          throw DomainError("log of non-positive value " + std::to_string(v) + " at index " +
                            std::to_string(i));
        }
        out[i] = std::log(v);
        break;
      case Unary::elu: out[i] = v > 0.0 ? v : std::expm1(v); break;
      case Unary::leaky_relu: out[i] = v > 0.0 ? v : param * v; break;
      case Unary::tanh: out[i] = std::tanh(v); break;
      case Unary::softplus: out[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); break;
      case Unary::square: out[i] = v * v; break;
      case Unary::sqrt:
        if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
        out[i] = std::sqrt(v);
        break;
    }
  }
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result(x.shape(), std::move(out), rec, unary_name(kind));
  if (rec) {
    detail::record(OpKind::unary, {&x}, y, [xn, yn = y.node(), kind, param] {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) {
        const double v = xn->value[i], o = yn->value[i], g = yn->grad[i];
        double d = 0.0;
        switch (kind) {
          case Unary::sigmoid: d = o * (1.0 - o); break;
          case Unary::exp: d = o; break;
          case Unary::log: d = 1.0 / v; break;
          case Unary::elu: d = v > 0.0 ? 1.0 : o + 1.0; break;
          case Unary::leaky_relu: d = v > 0.0 ? 1.0 : param; break;
          case Unary::tanh: d = 1.0 - o * o; break;
          case Unary::softplus: d = detail::stable_sigmoid(v); break;
          case Unary::square: d = 2.0 * v; break;
          case Unary::sqrt: d = o > 0.0 ? 0.5 / o : 0.0; break;
        }
        xn->grad[i] += g * d;
      }
    });
  }
  return y;
}

inline Tensor sigmoid(const Tensor& x) { return elementwise(Unary::sigmoid, x); }
inline Tensor exp(const Tensor& x) { return elementwise(Unary::exp, x); }
inline Tensor log(const Tensor& x) { return elementwise(Unary::log, x); }
inline Tensor elu(const Tensor& x) { return elementwise(Unary::elu, x); }
inline Tensor leaky_relu(const Tensor& x, double slope = 0.2) {
  return elementwise(Unary::leaky_relu, x, slope);
}
inline Tensor tanh(const Tensor& x) { return elementwise(Unary::tanh, x); }
inline Tensor softplus(const Tensor& x) { return elementwise(Unary::softplus, x); }
inline Tensor square(const Tensor& x) { return elementwise(Unary::square, x); }
inline Tensor sqrt(const Tensor& x) { return elementwise(Unary::sqrt, x); }

inline Tensor one_minus(const Tensor& x) { return shift(scale(x, -1.0), 1.0); }

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
  auto xn = x.node();
  double s = 0.0;
  for (double v : xn->value) s += v;
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result({}, {s}, rec, "sum");
  if (rec) {
    detail::record(OpKind::sum, {&x}, y, [xn, yn = y.node()] {
      for (double& g : xn->grad) g += yn->grad[0];
    });
  }
  return y;
}

inline Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ContractError("mean of empty tensor");
  auto xn = x.node();
  double s = 0.0;
  for (double v : xn->value) s += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result({}, {s * inv}, rec, "mean");
  if (rec) {
    detail::record(OpKind::mean, {&x}, y, [xn, yn = y.node(), inv] {
      for (double& g : xn->grad) g += yn->grad[0] * inv;
    });
  }
  return y;
}

/// Sum over columns: [n x d] -> [n x 1].
inline Tensor row_sum(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  auto xn = x.node();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += xn->value[i * d + j];
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result({n, 1}, std::move(out), rec, "row_sum");
  if (rec) {
    detail::record(OpKind::row_sum, {&x}, y, [xn, yn = y.node(), n, d] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += yn->grad[i];
    });
  }
  return y;
}

/// Row-wise log-softmax, stabilized by max subtraction.
inline Tensor log_softmax(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  auto xn = x.node();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xn->value.data() + i * d;
    const double mx = *std::max_element(row, row + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = row[j] - lse;
  }
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result(x.shape(), std::move(out), rec, "log_softmax");
  if (rec) {
    detail::record(OpKind::log_softmax, {&x}, y, [xn, yn = y.node(), n, d] {
      for (std::size_t i = 0; i < n; ++i) {
        double gs = 0.0;
        for (std::size_t j = 0; j < d; ++j) gs += yn->grad[i * d + j];
        for (std::size_t j = 0; j < d; ++j) {
          xn->grad[i * d + j] += yn->grad[i * d + j] - std::exp(yn->value[i * d + j]) * gs;
        }
      }
    });
  }
  return y;
}

/// Row-wise log-sum-exp: [n x d] -> [n x 1].
inline Tensor logsumexp_rows(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  if (d == 0) throw ContractError("logsumexp_rows over zero columns");
  auto xn = x.node();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xn->value.data() + i * d;
    const double mx = *std::max_element(row, row + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(row[j] - mx);
    out[i] = mx + std::log(s);
  }
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result({n, 1}, std::move(out), rec, "logsumexp_rows");
  if (rec) {
    detail::record(OpKind::logsumexp_rows, {&x}, y, [xn, yn = y.node(), n, d] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          xn->grad[i * d + j] += yn->grad[i] * std::exp(xn->value[i * d + j] - yn->value[i]);
        }
    });
  }
  return y;
}

/// Scales every row to unit L2 norm; rows with norm below eps are divided by
/// eps instead, so an all-zero row maps to zero.
inline Tensor normalize_rows(const Tensor& x, double eps = 1e-12) {
  const std::size_t n = x.rows(), d = x.cols();
  auto xn = x.node();
  std::vector<double> out(x.size());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += xn->value[i * d + j] * xn->value[i * d + j];
    norms[i] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xn->value[i * d + j] / norms[i];
  }
  const bool rec = detail::recording({&x});
  Tensor y = detail::make_result(x.shape(), std::move(out), rec, "normalize_rows");
  if (rec) {
    detail::record(OpKind::normalize_rows, {&x}, y,
                   [xn, yn = y.node(), n, d, eps, norms = std::move(norms)] {
                     for (std::size_t i = 0; i < n; ++i) {
                       const double* g = yn->grad.data() + i * d;
                       const double* o = yn->value.data() + i * d;
                       if (norms[i] > eps) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < d; ++j) dot += g[j] * o[j];
                         for (std::size_t j = 0; j < d; ++j) {
                           xn->grad[i * d + j] += (g[j] - o[j] * dot) / norms[i];
                         }
                       } else {
                         for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += g[j] / eps;
                       }
                     }
                   });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Structural
// ---------------------------------------------------------------------------

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  if (b.rows() != n) {
    throw DimensionError("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  auto an = a.node(), bn = b.node();
  std::vector<double> out(n * (p + q));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(an->value.data() + i * p, p, out.data() + i * (p + q));
    std::copy_n(bn->value.data() + i * q, q, out.data() + i * (p + q) + p);
  }
  const bool rec = detail::recording({&a, &b});
  Tensor c = detail::make_result({n, p + q}, std::move(out), rec, "concat_cols");
  if (rec) {
    detail::record(OpKind::concat_cols, {&a, &b}, c, [an, bn, cn = c.node(), n, p, q] {
      for (std::size_t i = 0; i < n; ++i) {
        if (detail::tracks(an))
          for (std::size_t j = 0; j < p; ++j) an->grad[i * p + j] += cn->grad[i * (p + q) + j];
        if (detail::tracks(bn))
          for (std::size_t j = 0; j < q; ++j) bn->grad[i * q + j] += cn->grad[i * (p + q) + p + j];
      }
    });
  }
  return c;
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t n = a.rows(), d = a.cols();
  if (begin > end || end > d) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(a.shape()));
  }
  const std::size_t w = end - begin;
  auto an = a.node();
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(an->value.data() + i * d + begin, w, out.data() + i * w);
  const bool rec = detail::recording({&a});
  Tensor c = detail::make_result({n, w}, std::move(out), rec, "slice_cols");
  if (rec) {
    detail::record(OpKind::slice_cols, {&a}, c, [an, cn = c.node(), n, d, w, begin] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) an->grad[i * d + begin + j] += cn->grad[i * w + j];
    });
  }
  return c;
}

/// Selects rows by index (repeats allowed); backward scatter-adds.
inline Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t n = a.rows(), d = a.cols(), m = index.size();
  auto an = a.node();
  std::vector<double> out(m * d);
  for (std::size_t r = 0; r < m; ++r) {
    if (index[r] >= n) {
      throw StructureError("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                           std::to_string(n) + " rows");
    }
    std::copy_n(an->value.data() + index[r] * d, d, out.data() + r * d);
  }
  Shape shape = a.shape();
  if (shape.empty()) shape = {1};
  shape[0] = m;
  const bool rec = detail::recording({&a});
  Tensor c = detail::make_result(std::move(shape), std::move(out), rec, "gather_rows");
  if (rec) {
    detail::record(OpKind::gather_rows, {&a}, c,
                   [an, cn = c.node(), d, idx = std::vector<std::size_t>(index.begin(), index.end())] {
                     for (std::size_t r = 0; r < idx.size(); ++r)
                       for (std::size_t j = 0; j < d; ++j) an->grad[idx[r] * d + j] += cn->grad[r * d + j];
                   });
  }
  return c;
}

/// Picks a[rows[i], cols[i]] for each i; result has shape [m].
inline Tensor pick(const Tensor& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  if (rows.size() != cols.size()) throw DimensionError("pick: rows and cols differ in length");
  const std::size_t n = a.rows(), d = a.cols(), m = rows.size();
  auto an = a.node();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (rows[i] >= n || cols[i] >= d) {
      throw StructureError("pick: (" + std::to_string(rows[i]) + "," + std::to_string(cols[i]) +
                           ") outside " + shape_str(a.shape()));
    }
    out[i] = an->value[rows[i] * d + cols[i]];
  }
  const bool rec = detail::recording({&a});
  Tensor c = detail::make_result({m}, std::move(out), rec, "pick");
  if (rec) {
    std::vector<std::size_t> flat(m);
    for (std::size_t i = 0; i < m; ++i) flat[i] = rows[i] * d + cols[i];
    detail::record(OpKind::pick, {&a}, c, [an, cn = c.node(), flat = std::move(flat)] {
      for (std::size_t i = 0; i < flat.size(); ++i) an->grad[flat[i]] += cn->grad[i];
    });
  }
  return c;
}

// ---------------------------------------------------------------------------
// Segment (neighbourhood) operations
// ---------------------------------------------------------------------------

/// Sums rows of values[E x d] into n buckets given by segments (any order).
inline Tensor segment_sum(const Tensor& values, std::span<const std::size_t> segments, std::size_t n) {
  const std::size_t e = values.rows(), d = values.cols();
  if (segments.size() != e) {
    throw DimensionError("segment_sum: " + std::to_string(segments.size()) + " segment ids for " +
                         std::to_string(e) + " rows");
  }
  auto vn = values.node();
  std::vector<double> out(n * d, 0.0);
  for (std::size_t r = 0; r < e; ++r) {
    if (segments[r] >= n) {
      throw StructureError("segment_sum: segment id " + std::to_string(segments[r]) + " at edge " +
                           std::to_string(r) + " is out of range for n=" + std::to_string(n));
    }
    for (std::size_t j = 0; j < d; ++j) out[segments[r] * d + j] += vn->value[r * d + j];
  }
  const bool rec = detail::recording({&values});
  Tensor c = detail::make_result({n, d}, std::move(out), rec, "segment_sum");
  if (rec) {
    detail::record(OpKind::segment_sum, {&values}, c,
                   [vn, cn = c.node(), d, seg = std::vector<std::size_t>(segments.begin(), segments.end())] {
                     for (std::size_t r = 0; r < seg.size(); ++r)
                       for (std::size_t j = 0; j < d; ++j) vn->grad[r * d + j] += cn->grad[seg[r] * d + j];
                   });
  }
  return c;
}

/// Softmax of scores[E] or scores[E x H] within each run of equal segment ids,
/// independently per column. Segment ids must be non-decreasing (CSR order).
inline Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segments) {
  const std::size_t e = scores.rows(), h = scores.cols();
  if (segments.size() != e) {
    throw DimensionError("segment_softmax: " + std::to_string(segments.size()) + " segment ids for " +
                         std::to_string(e) + " scores");
  }
  for (std::size_t r = 1; r < e; ++r) {
    if (segments[r] < segments[r - 1]) {
      throw StructureError("segment_softmax: segment ids not sorted at position " + std::to_string(r));
    }
  }
  // [begin, end) ranges of each segment run.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t r = 0; r < e;) {
    std::size_t s = r;
    while (r < e && segments[r] == segments[s]) ++r;
    runs.emplace_back(s, r);
  }
  auto sn = scores.node();
  std::vector<double> out(scores.size());
  for (auto [b, f] : runs) {
    for (std::size_t k = 0; k < h; ++k) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t r = b; r < f; ++r) mx = std::max(mx, sn->value[r * h + k]);
      double total = 0.0;
      for (std::size_t r = b; r < f; ++r) {
        out[r * h + k] = std::exp(sn->value[r * h + k] - mx);
        total += out[r * h + k];
      }
      for (std::size_t r = b; r < f; ++r) out[r * h + k] /= total;
    }
  }
  const bool rec = detail::recording({&scores});
  Tensor c = detail::make_result(scores.shape(), std::move(out), rec, "segment_softmax");
  if (rec) {
    detail::record(OpKind::segment_softmax, {&scores}, c, [sn, cn = c.node(), h, runs = std::move(runs)] {
      for (auto [b, f] : runs) {
        for (std::size_t k = 0; k < h; ++k) {
          double dot = 0.0;
          for (std::size_t r = b; r < f; ++r) dot += cn->grad[r * h + k] * cn->value[r * h + k];
          for (std::size_t r = b; r < f; ++r) {
            sn->grad[r * h + k] += cn->value[r * h + k] * (cn->grad[r * h + k] - dot);
          }
        }
      }
    });
  }
  return c;
}

// ---------------------------------------------------------------------------
// Multi-head helpers. A row of width H*D is H consecutive blocks of width D.
// ---------------------------------------------------------------------------

/// out[r, h] = <x[r, block h], a[block h]>.
inline Tensor head_dot(const Tensor& x, const Tensor& a, std::size_t heads) {
  const std::size_t e = x.rows(), w = x.cols();
  if (heads == 0 || w % heads != 0 || a.size() != w) {
    throw DimensionError("head_dot: " + shape_str(x.shape()) + " with attention " + shape_str(a.shape()) +
                         " and " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = w / heads;
  auto xn = x.node(), an = a.node();
  std::vector<double> out(e * heads, 0.0);
  for (std::size_t r = 0; r < e; ++r)
    for (std::size_t k = 0; k < heads; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < dh; ++j) s += xn->value[r * w + k * dh + j] * an->value[k * dh + j];
      out[r * heads + k] = s;
    }
  const bool rec = detail::recording({&x, &a});
  Tensor c = detail::make_result({e, heads}, std::move(out), rec, "head_dot");
  if (rec) {
    detail::record(OpKind::head_dot, {&x, &a}, c, [xn, an, cn = c.node(), e, w, heads, dh] {
      for (std::size_t r = 0; r < e; ++r)
        for (std::size_t k = 0; k < heads; ++k) {
          const double g = cn->grad[r * heads + k];
          for (std::size_t j = 0; j < dh; ++j) {
            if (detail::tracks(xn)) xn->grad[r * w + k * dh + j] += g * an->value[k * dh + j];
            if (detail::tracks(an)) an->grad[k * dh + j] += g * xn->value[r * w + k * dh + j];
          }
        }
    });
  }
  return c;
}

/// out[r, block h] = x[r, block h] * weight[r, h].
inline Tensor head_scale(const Tensor& x, const Tensor& weight) {
  const std::size_t e = x.rows(), w = x.cols(), heads = weight.cols();
  if (weight.rows() != e || heads == 0 || w % heads != 0) {
    throw DimensionError("head_scale: " + shape_str(x.shape()) + " with weights " + shape_str(weight.shape()));
  }
  const std::size_t dh = w / heads;
  auto xn = x.node(), wn = weight.node();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < e; ++r)
    for (std::size_t k = 0; k < heads; ++k)
      for (std::size_t j = 0; j < dh; ++j)
        out[r * w + k * dh + j] = xn->value[r * w + k * dh + j] * wn->value[r * heads + k];
  const bool rec = detail::recording({&x, &weight});
  Tensor c = detail::make_result(x.shape(), std::move(out), rec, "head_scale");
  if (rec) {
    detail::record(OpKind::head_scale, {&x, &weight}, c, [xn, wn, cn = c.node(), e, w, heads, dh] {
      for (std::size_t r = 0; r < e; ++r)
        for (std::size_t k = 0; k < heads; ++k)
          for (std::size_t j = 0; j < dh; ++j) {
            const double g = cn->grad[r * w + k * dh + j];
            if (detail::tracks(xn)) xn->grad[r * w + k * dh + j] += g * wn->value[r * heads + k];
            if (detail::tracks(wn)) wn->grad[r * heads + k] += g * xn->value[r * w + k * dh + j];
          }
    });
  }
  return c;
}

/// Averages the H blocks of each row: [n x H*D] -> [n x D].
inline Tensor head_mean(const Tensor& x, std::size_t heads) {
  const std::size_t n = x.rows(), w = x.cols();
  if (heads == 0 || w % heads != 0) {
    throw DimensionError("head_mean: " + shape_str(x.shape()) + " with " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = w / heads;
  const double inv = 1.0 / static_cast<double>(heads);
  auto xn = x.node();
  std::vector<double> out(n * dh, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < heads; ++k)
      for (std::size_t j = 0; j < dh; ++j) out[i * dh + j] += xn->value[i * w + k * dh + j] * inv;
  const bool rec = detail::recording({&x});
  Tensor c = detail::make_result({n, dh}, std::move(out), rec, "head_mean");
  if (rec) {
    detail::record(OpKind::head_mean, {&x}, c, [xn, cn = c.node(), n, w, heads, dh, inv] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < heads; ++k)
          for (std::size_t j = 0; j < dh; ++j) xn->grad[i * w + k * dh + j] += cn->grad[i * dh + j] * inv;
    });
  }
  return c;
}

// ---------------------------------------------------------------------------
// Fused edge kernels. Edge r runs sources[r] -> targets[r]; x is [n x H*D].
// ---------------------------------------------------------------------------

/// out[r, h] = <a[block h], LeakyReLU(x[targets[r], block h] + x[sources[r], block h])>.
/// Equivalent to head_dot(leaky_relu(add(gather(x, targets), gather(x, sources))), a)
/// without materializing the per-edge features.
inline Tensor edge_scores(const Tensor& x, const Tensor& a, std::span<const std::size_t> sources,
                          std::span<const std::size_t> targets, std::size_t heads, double slope) {
  const std::size_t n = x.rows(), w = x.cols(), e = sources.size();
  if (targets.size() != e) throw DimensionError("edge_scores: source and target lists differ in length");
  if (heads == 0 || w % heads != 0 || a.size() != w) {
    throw DimensionError("edge_scores: " + shape_str(x.shape()) + " with attention " + shape_str(a.shape()) +
                         " and " + std::to_string(heads) + " heads");
  }
  for (std::size_t r = 0; r < e; ++r) {
    if (sources[r] >= n || targets[r] >= n) {
      throw StructureError("edge_scores: edge " + std::to_string(r) + " has an endpoint >= " + std::to_string(n));
    }
  }
  const std::size_t dh = w / heads;
  auto xn = x.node(), an = a.node();
  const double* xv = xn->value.data();
  const double* av = an->value.data();
  std::vector<double> out(e * heads);
  for (std::size_t r = 0; r < e; ++r) {
    const double* xs = xv + sources[r] * w;
    const double* xt = xv + targets[r] * w;
    for (std::size_t k = 0; k < heads; ++k) {
      double acc = 0.0;
      for (std::size_t j = k * dh; j < (k + 1) * dh; ++j) {
        const double z = xt[j] + xs[j];
        acc += av[j] * (z > 0.0 ? z : slope * z);
      }
      out[r * heads + k] = acc;
    }
  }
  const bool rec = detail::recording({&x, &a});
  Tensor c = detail::make_result({e, heads}, std::move(out), rec, "edge_scores");
  if (rec) {
    detail::record(OpKind::edge_scores, {&x, &a}, c,
                   [xn, an, cn = c.node(), w, heads, dh, slope, src = std::vector<std::size_t>(sources.begin(), sources.end()),
                    dst = std::vector<std::size_t>(targets.begin(), targets.end())] {
                     const double* xv = xn->value.data();
                     const double* av = an->value.data();
                     const bool gx = detail::tracks(xn), ga = detail::tracks(an);
                     for (std::size_t r = 0; r < src.size(); ++r) {
                       const double* xs = xv + src[r] * w;
                       const double* xt = xv + dst[r] * w;
                       for (std::size_t k = 0; k < heads; ++k) {
                         const double g = cn->grad[r * heads + k];
                         if (g == 0.0) continue;
                         for (std::size_t j = k * dh; j < (k + 1) * dh; ++j) {
                           const double z = xt[j] + xs[j];
                           if (ga) an->grad[j] += g * (z > 0.0 ? z : slope * z);
                           if (gx) {
                             const double dz = g * av[j] * (z > 0.0 ? 1.0 : slope);
                             xn->grad[src[r] * w + j] += dz;
                             xn->grad[dst[r] * w + j] += dz;
                           }
                         }
                       }
                     }
                   });
  }
  return c;
}

/// out[t, block h] = sum over edges r with targets[r] = t of alpha[r, h] * x[sources[r], block h].
/// Equivalent to segment_sum(head_scale(gather(x, sources), alpha), targets, n).
inline Tensor edge_aggregate(const Tensor& x, const Tensor& alpha, std::span<const std::size_t> sources,
                             std::span<const std::size_t> targets, std::size_t n) {
  const std::size_t nx = x.rows(), w = x.cols(), e = sources.size(), heads = alpha.cols();
  if (targets.size() != e || alpha.rows() != e) {
    throw DimensionError("edge_aggregate: " + std::to_string(e) + " edges with attention " +
                         shape_str(alpha.shape()));
  }
  if (heads == 0 || w % heads != 0) {
    throw DimensionError("edge_aggregate: " + shape_str(x.shape()) + " with " + std::to_string(heads) + " heads");
  }
  for (std::size_t r = 0; r < e; ++r) {
    if (sources[r] >= nx || targets[r] >= n) {
      throw StructureError("edge_aggregate: edge " + std::to_string(r) + " has an endpoint out of range");
    }
  }
  const std::size_t dh = w / heads;
  auto xn = x.node(), wn = alpha.node();
  const double* xv = xn->value.data();
  const double* wv = wn->value.data();
  std::vector<double> out(n * w, 0.0);
  for (std::size_t r = 0; r < e; ++r) {
    const double* xs = xv + sources[r] * w;
    double* o = out.data() + targets[r] * w;
    for (std::size_t k = 0; k < heads; ++k) {
      const double s = wv[r * heads + k];
      for (std::size_t j = k * dh; j < (k + 1) * dh; ++j) o[j] += s * xs[j];
    }
  }
  const bool rec = detail::recording({&x, &alpha});
  Tensor c = detail::make_result({n, w}, std::move(out), rec, "edge_aggregate");
  if (rec) {
    detail::record(OpKind::edge_aggregate, {&x, &alpha}, c,
                   [xn, wn, cn = c.node(), w, heads, dh, src = std::vector<std::size_t>(sources.begin(), sources.end()),
                    dst = std::vector<std::size_t>(targets.begin(), targets.end())] {
                     const double* xv = xn->value.data();
                     const double* wv = wn->value.data();
                     const bool gx = detail::tracks(xn), gw = detail::tracks(wn);
                     for (std::size_t r = 0; r < src.size(); ++r) {
                       const double* g = cn->grad.data() + dst[r] * w;
                       const double* xs = xv + src[r] * w;
                       for (std::size_t k = 0; k < heads; ++k) {
                         const double s = wv[r * heads + k];
                         double dot = 0.0;
                         for (std::size_t j = k * dh; j < (k + 1) * dh; ++j) {
                           if (gx) xn->grad[src[r] * w + j] += s * g[j];
                           dot += g[j] * xs[j];
                         }
                         if (gw) wn->grad[r * heads + k] += dot;
                       }
                     }
                   });
  }
  return c;
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

/// Row-wise inner products: [n x d], [n x d] -> [n x 1].
inline Tensor dot_rows(const Tensor& a, const Tensor& b) { return row_sum(mul(a, b)); }

/// Mean negative log-likelihood of targets[i] at logits row rows[i].
inline Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> rows,
                            std::span<const std::size_t> targets) {
  if (rows.empty()) throw ContractError("cross_entropy over an empty row set");
  return scale(mean(pick(log_softmax(logits), rows, targets)), -1.0);
}

}  // namespace ccagnn
