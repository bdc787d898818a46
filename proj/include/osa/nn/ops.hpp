// osa/nn/ops.hpp

// Copyright 2026 osa-vocoder authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Differentiable operations. Every op computes its forward value eagerly and,
// when the tape is recording and some input tracks gradients, records a
// closure that accumulates into the input gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "osa/error.hpp"
#include "osa/nn/tensor.hpp"

namespace osa::nn {

namespace detail {

template <typename S>
Tensor<S> Result(RowMatrix<S> value, bool tracked) {
  return Tensor<S>::FromMatrix(std::move(value), tracked);
}

template <typename S>
Tensor<S> Result(RowMatrix<S> value, Shape shape, bool tracked) {
  return Tensor<S>::FromMatrix(std::move(value), std::move(shape), tracked);
}

template <typename S>
void RequireSameShape(const Tensor<S> &a, const Tensor<S> &b, const char *op) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShapeMismatch,
          std::string(op) + ": operand shapes " + ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
}

template <typename S>
S Sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

}  // namespace detail

/// y = x W + b, with W [in x out] and optional b [out].
template <typename S>
Tensor<S> Linear(Tape<S> &tape, const Tensor<S> &x, const Tensor<S> &w, const Tensor<S> &b = {}) {
  Require(x.cols() == w.rows(), ErrorCode::kShapeMismatch,
          "linear: input " + ShapeString(x.shape()) + " vs weight " + ShapeString(w.shape()));
  if (b.defined())
    Require(b.size() == w.cols(), ErrorCode::kShapeMismatch, "linear: bias " + ShapeString(b.shape()));
  RowMatrix<S> y = x.value() * w.value();
  if (b.defined()) y.rowwise() += Eigen::Map<const RowVector<S>>(b.value().data(), b.size());
  const bool tracked = tape.Tracks(x, w) || (b.defined() && tape.Tracks(b));
  Tensor<S> out = detail::Result(std::move(y), tracked);
  if (tracked) {
    tape.Record([x, w, b, out] {
      const auto &dy = out.grad();
      if (x.requires_grad()) x.grad().noalias() += dy * w.value().transpose();
      if (w.requires_grad()) w.grad().noalias() += x.value().transpose() * dy;
      if (b.defined() && b.requires_grad()) {
        RowVector<S> db = dy.colwise().sum();
        Eigen::Map<RowVector<S>>(b.grad().data(), b.size()) += db;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> Add(Tape<S> &tape, const Tensor<S> &a, const Tensor<S> &b) {
  detail::RequireSameShape(a, b, "add");
  const bool tracked = tape.Tracks(a, b);
  Tensor<S> out = detail::Result<S>(a.value() + b.value(), a.shape(), tracked);
  if (tracked) {
    tape.Record([a, b, out] {
      if (a.requires_grad()) a.grad() += out.grad();
      if (b.requires_grad()) b.grad() += out.grad();
    });
  }
  return out;
}

template <typename S>
Tensor<S> Mul(Tape<S> &tape, const Tensor<S> &a, const Tensor<S> &b) {
  detail::RequireSameShape(a, b, "mul");
  const bool tracked = tape.Tracks(a, b);
  Tensor<S> out = detail::Result<S>(a.value().cwiseProduct(b.value()), a.shape(), tracked);
  if (tracked) {
    tape.Record([a, b, out] {
      if (a.requires_grad()) a.grad() += out.grad().cwiseProduct(b.value());
      if (b.requires_grad()) b.grad() += out.grad().cwiseProduct(a.value());
    });
  }
  return out;
}

template <typename S>
Tensor<S> Tanh(Tape<S> &tape, const Tensor<S> &x) {
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result<S>(x.value().array().tanh().matrix(), x.shape(), tracked);
  if (tracked) {
    tape.Record([x, out] {
      const auto &y = out.value();
      x.grad().array() += out.grad().array() * (S(1) - y.array().square());
    });
  }
  return out;
}

template <typename S>
Tensor<S> Sigmoid(Tape<S> &tape, const Tensor<S> &x) {
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result<S>(x.value().unaryExpr([](S v) { return detail::Sigmoid(v); }), x.shape(), tracked);
  if (tracked) {
    tape.Record([x, out] {
      const auto &y = out.value();
      x.grad().array() += out.grad().array() * y.array() * (S(1) - y.array());
    });
  }
  return out;
}

template <typename S>
Tensor<S> Relu(Tape<S> &tape, const Tensor<S> &x) {
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result<S>(x.value().cwiseMax(S(0)), x.shape(), tracked);
  if (tracked) {
    tape.Record([x, out] {
      x.grad().array() += (x.value().array() > S(0)).select(out.grad().array(), S(0));
    });
  }
  return out;
}

/// tanh(filter) * sigmoid(gate).
template <typename S>
Tensor<S> GatedActivation(Tape<S> &tape, const Tensor<S> &filter, const Tensor<S> &gate) {
  detail::RequireSameShape(filter, gate, "gated_activation");
  RowMatrix<S> t = filter.value().array().tanh().matrix();
  RowMatrix<S> s = gate.value().unaryExpr([](S v) { return detail::Sigmoid(v); });
  const bool tracked = tape.Tracks(filter, gate);
  Tensor<S> out = detail::Result<S>(t.cwiseProduct(s), filter.shape(), tracked);
  if (tracked) {
    tape.Record([filter, gate, out, t = std::move(t), s = std::move(s)] {
      const auto &dy = out.grad().array();
      if (filter.requires_grad()) filter.grad().array() += dy * s.array() * (S(1) - t.array().square());
      if (gate.requires_grad()) gate.grad().array() += dy * t.array() * s.array() * (S(1) - s.array());
    });
  }
  return out;
}

template <typename S>
Tensor<S> SliceCols(Tape<S> &tape, const Tensor<S> &x, Index start, Index count) {
  Require(start >= 0 && count >= 0 && start + count <= x.cols(), ErrorCode::kOutOfRange, "slice_cols out of range");
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result<S>(x.value().middleCols(start, count), tracked);
  if (tracked) {
    tape.Record([x, out, start, count] { x.grad().middleCols(start, count) += out.grad(); });
  }
  return out;
}

template <typename S>
Tensor<S> SliceRows(Tape<S> &tape, const Tensor<S> &x, Index start, Index count) {
  Require(start >= 0 && count >= 0 && start + count <= x.rows(), ErrorCode::kOutOfRange, "slice_rows out of range");
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result<S>(x.value().middleRows(start, count), tracked);
  if (tracked) {
    tape.Record([x, out, start, count] { x.grad().middleRows(start, count) += out.grad(); });
  }
  return out;
}

template <typename S>
Tensor<S> ConcatCols(Tape<S> &tape, const Tensor<S> &a, const Tensor<S> &b) {
  Require(a.rows() == b.rows(), ErrorCode::kShapeMismatch, "concat_cols: row counts differ");
  RowMatrix<S> y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  const bool tracked = tape.Tracks(a, b);
  Tensor<S> out = detail::Result(std::move(y), tracked);
  if (tracked) {
    tape.Record([a, b, out] {
      if (a.requires_grad()) a.grad() += out.grad().leftCols(a.cols());
      if (b.requires_grad()) b.grad() += out.grad().rightCols(b.cols());
    });
  }
  return out;
}

/// Repeats every row `factor` times (frame-to-sample upsampling).
template <typename S>
Tensor<S> RepeatRows(Tape<S> &tape, const Tensor<S> &x, Index factor) {
  Require(factor >= 1, ErrorCode::kInvalidArgument, "repeat factor must be >= 1");
  RowMatrix<S> y(x.rows() * factor, x.cols());
  for (Index r = 0; r < x.rows(); ++r) y.middleRows(r * factor, factor).rowwise() = x.value().row(r);
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result(std::move(y), tracked);
  if (tracked) {
    tape.Record([x, out, factor] {
      auto &dx = x.grad();
      for (Index r = 0; r < x.rows(); ++r) dx.row(r) += out.grad().middleRows(r * factor, factor).colwise().sum();
    });
  }
  return out;
}

enum class Padding { kCausal, kSame };

/// Dilated 1-D convolution over time. x is [T x C_in]; the kernel has shape
/// [k, C_in, C_out] and tap j reads x[t - j*dilation + lookahead], where the
/// lookahead is 0 for causal padding and (k-1)/2*dilation for same padding.
/// Out-of-range inputs are zero.
template <typename S>
Tensor<S> Conv1d(Tape<S> &tape, const Tensor<S> &x, const Tensor<S> &kernel, const Tensor<S> &bias,
                 Index dilation, Padding padding = Padding::kCausal) {
  Require(kernel.shape().size() == 3, ErrorCode::kShapeMismatch, "conv1d kernel must be [k, C_in, C_out]");
  const Index k = kernel.shape()[0], c_in = kernel.shape()[1], c_out = kernel.shape()[2];
  Require(x.cols() == c_in, ErrorCode::kShapeMismatch,
          "conv1d: input " + ShapeString(x.shape()) + " vs kernel " + ShapeString(kernel.shape()));
  Require(dilation >= 1, ErrorCode::kInvalidArgument, "conv1d dilation must be >= 1");
  if (bias.defined()) Require(bias.size() == c_out, ErrorCode::kShapeMismatch, "conv1d bias size");
  const Index T = x.rows();
  const Index lookahead = padding == Padding::kCausal ? 0 : (k - 1) / 2 * dilation;
  const auto &xv = x.value();
  const auto &kv = kernel.value();
  RowMatrix<S> y = RowMatrix<S>::Zero(T, c_out);
  if (bias.defined()) y.rowwise() += Eigen::Map<const RowVector<S>>(bias.value().data(), c_out);
  for (Index j = 0; j < k; ++j) {
    const Index off = lookahead - j * dilation;
    const Index n = T - std::abs(off);
    if (n <= 0) continue;
    const auto tap = kv.middleRows(j * c_in, c_in);
    if (off <= 0)
      y.bottomRows(n).noalias() += xv.topRows(n) * tap;
    else
      y.topRows(n).noalias() += xv.bottomRows(n) * tap;
  }
  const bool tracked = tape.Tracks(x, kernel) || (bias.defined() && tape.Tracks(bias));
  Tensor<S> out = detail::Result(std::move(y), tracked);
  if (tracked) {
    tape.Record([x, kernel, bias, out, k, c_in, dilation, lookahead, T] {
      const auto &dy = out.grad();
      for (Index j = 0; j < k; ++j) {
        const Index off = lookahead - j * dilation;
        const Index n = T - std::abs(off);
        if (n <= 0) continue;
        const auto dy_rows = off <= 0 ? dy.bottomRows(n) : dy.topRows(n);
        if (x.requires_grad()) {
          auto &dx = x.grad();
          const auto tap = kernel.value().middleRows(j * c_in, c_in);
          if (off <= 0)
            dx.topRows(n).noalias() += dy_rows * tap.transpose();
          else
            dx.bottomRows(n).noalias() += dy_rows * tap.transpose();
        }
        if (kernel.requires_grad()) {
          const auto x_rows = off <= 0 ? x.value().topRows(n) : x.value().bottomRows(n);
          kernel.grad().middleRows(j * c_in, c_in).noalias() += x_rows.transpose() * dy_rows;
        }
      }
      if (bias.defined() && bias.requires_grad()) {
        RowVector<S> db = dy.colwise().sum();
        Eigen::Map<RowVector<S>>(bias.grad().data(), bias.size()) += db;
      }
    });
  }
  return out;
}

/// Row lookup: y[t] = table[indices[t]] (+ bias). Equivalent to a one-hot
/// input followed by a 1x1 convolution.
template <typename S>
Tensor<S> Embedding(Tape<S> &tape, std::span<const int> indices, const Tensor<S> &table, const Tensor<S> &bias = {}) {
  const Index n = static_cast<Index>(indices.size());
  RowMatrix<S> y(n, table.cols());
  for (Index t = 0; t < n; ++t) {
    Require(indices[t] >= 0 && indices[t] < table.rows(), ErrorCode::kOutOfRange,
            "embedding index " + std::to_string(indices[t]));
    y.row(t) = table.value().row(indices[t]);
  }
  if (bias.defined()) y.rowwise() += Eigen::Map<const RowVector<S>>(bias.value().data(), bias.size());
  const bool tracked = tape.Tracks(table) || (bias.defined() && tape.Tracks(bias));
  Tensor<S> out = detail::Result(std::move(y), tracked);
  if (tracked) {
    std::vector<int> idx(indices.begin(), indices.end());
    tape.Record([table, bias, out, idx = std::move(idx)] {
      const auto &dy = out.grad();
      if (table.requires_grad()) {
        auto &dt = table.grad();
        for (size_t t = 0; t < idx.size(); ++t) dt.row(idx[t]) += dy.row(static_cast<Index>(t));
      }
      if (bias.defined() && bias.requires_grad()) {
        RowVector<S> db = dy.colwise().sum();
        Eigen::Map<RowVector<S>>(bias.grad().data(), bias.size()) += db;
      }
    });
  }
  return out;
}

/// Row-wise softmax (forward only, no tape).
template <typename S>
RowMatrix<S> Softmax(const RowMatrix<S> &logits) {
  RowMatrix<S> p(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const S m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// Mean negative log-softmax of the target classes over rows
/// [first_row, rows). Max-subtraction keeps it finite for any logits.
template <typename S>
Tensor<S> SoftmaxCrossEntropy(Tape<S> &tape, const Tensor<S> &logits, std::span<const int> targets,
                              Index first_row = 0) {
  const Index rows = logits.rows(), classes = logits.cols();
  Require(static_cast<Index>(targets.size()) == rows, ErrorCode::kShapeMismatch,
          "cross-entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) + " rows");
  Require(first_row >= 0 && first_row < rows, ErrorCode::kOutOfRange, "cross-entropy: empty row range");
  for (Index r = first_row; r < rows; ++r)
    Require(targets[r] >= 0 && targets[r] < classes, ErrorCode::kOutOfRange,
            "cross-entropy target " + std::to_string(targets[r]));
  const Index n = rows - first_row;
  RowMatrix<S> probs(n, classes);
  double total = 0.0;
  for (Index r = 0; r < n; ++r) {
    const auto row = logits.value().row(first_row + r);
    const S m = row.maxCoeff();
    probs.row(r) = (row.array() - m).exp().matrix();
    const S z = probs.row(r).sum();
    probs.row(r) /= z;
    total += static_cast<double>(m + std::log(z) - row(targets[first_row + r]));
  }
  const bool tracked = tape.Tracks(logits);
  Tensor<S> out = Tensor<S>::Scalar(static_cast<S>(total / static_cast<double>(n)), tracked);
  if (tracked) {
    std::vector<int> tgt(targets.begin() + first_row, targets.end());
    tape.Record([logits, out, probs = std::move(probs), tgt = std::move(tgt), first_row, n] {
      const S scale = out.grad()(0, 0) / static_cast<S>(n);
      auto dl = logits.grad().middleRows(first_row, n);
      dl += scale * probs;
      for (Index r = 0; r < n; ++r) dl(r, tgt[r]) -= scale;
    });
  }
  return out;
}

/// Scales each row to unit L2 norm.
template <typename S>
Tensor<S> L2NormalizeRows(Tape<S> &tape, const Tensor<S> &x) {
  ColVector<S> norms = x.value().rowwise().norm().cwiseMax(S(1e-12));
  RowMatrix<S> y = norms.cwiseInverse().asDiagonal() * x.value();
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = detail::Result(std::move(y), tracked);
  if (tracked) {
    tape.Record([x, out, norms = std::move(norms)] {
      const auto &y = out.value();
      const auto &dy = out.grad();
      ColVector<S> dots = y.cwiseProduct(dy).rowwise().sum();
      x.grad() += norms.cwiseInverse().asDiagonal() * (dy - dots.asDiagonal() * y);
    });
  }
  return out;
}

/// Scalar sum of x * weights; a convenient generic loss for gradient checks.
template <typename S>
Tensor<S> WeightedSum(Tape<S> &tape, const Tensor<S> &x, const RowMatrix<S> &weights) {
  Require(weights.rows() == x.rows() && weights.cols() == x.cols(), ErrorCode::kShapeMismatch,
          "weighted_sum: weight shape");
  const bool tracked = tape.Tracks(x);
  Tensor<S> out = Tensor<S>::Scalar(x.value().cwiseProduct(weights).sum(), tracked);
  if (tracked) {
    tape.Record([x, out, weights] { x.grad() += out.grad()(0, 0) * weights; });
  }
  return out;
}

}  // namespace osa::nn
