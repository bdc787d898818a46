// osa/nn/tensor.hpp

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

// Tensors and the eager reverse-mode tape. A tensor of any rank is stored as
// a row-major matrix whose column count is the last dimension; everything
// else is flattened into rows.

#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "osa/error.hpp"
#include "osa/linalg.hpp"

namespace osa::nn {

using Shape = std::vector<Index>;

inline std::string ShapeString(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline Index ShapeRows(const Shape &shape) {
  if (shape.size() < 2) return 1;
  return std::accumulate(shape.begin(), shape.end() - 1, Index{1}, std::multiplies<>());
}

inline Index ShapeCols(const Shape &shape) { return shape.empty() ? 1 : shape.back(); }

template <typename S>
struct TensorNode {
  Shape shape;
  RowMatrix<S> value;
  RowMatrix<S> grad;
  bool requires_grad = false;

  /// Gradient buffer, allocated as zeros on first use.
  RowMatrix<S> &Grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = RowMatrix<S>::Zero(value.rows(), value.cols());
    return grad;
  }
};

/// Shared handle to a node; copies alias the same storage.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor FromMatrix(RowMatrix<S> value, bool requires_grad = false) {
    Shape shape{value.rows(), value.cols()};
    return FromMatrix(std::move(value), std::move(shape), requires_grad);
  }

  static Tensor FromMatrix(RowMatrix<S> value, Shape shape, bool requires_grad) {
    Require(ShapeRows(shape) == value.rows() && ShapeCols(shape) == value.cols(),
            ErrorCode::kShapeMismatch, "shape " + ShapeString(shape) + " does not fit storage");
    Tensor t;
    t.node_ = std::make_shared<TensorNode<S>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(value);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor Zeros(const Shape &shape, bool requires_grad = false) {
    return FromMatrix(RowMatrix<S>::Zero(ShapeRows(shape), ShapeCols(shape)), shape, requires_grad);
  }

  static Tensor Scalar(S v, bool requires_grad = false) {
    RowMatrix<S> m(1, 1);
    m(0, 0) = v;
    return FromMatrix(std::move(m), Shape{}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape &shape() const { return node_->shape; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  const RowMatrix<S> &value() const { return node_->value; }
  RowMatrix<S> &mutable_value() const { return node_->value; }
  RowMatrix<S> &grad() const { return node_->Grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  S item() const { return node_->value(0, 0); }
  void ZeroGrad() const {
    if (node_->requires_grad) node_->grad = RowMatrix<S>::Zero(rows(), cols());
  }
  const std::shared_ptr<TensorNode<S>> &node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<S>> node_;
};

/// Records backward closures in execution order. A non-recording tape runs
/// every op forward-only.
template <typename S>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool recording() const { return recording_; }

  template <typename... Ts>
  bool Tracks(const Ts &...inputs) const {
    return recording_ && (inputs.requires_grad() || ...);
  }

  void Record(std::function<void()> fn) { backward_.push_back(std::move(fn)); }

  /// Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse.
  void Backward(const Tensor<S> &loss) {
    Require(loss.size() == 1, ErrorCode::kShapeMismatch, "backward needs a scalar loss");
    if (!loss.requires_grad()) return;
    loss.grad()(0, 0) += S(1);
    for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)();
    backward_.clear();
  }

  void Clear() { backward_.clear(); }
  size_t size() const { return backward_.size(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> backward_;
};

}  // namespace osa::nn
