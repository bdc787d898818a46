// osa/nn/lstm.hpp

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

#pragma once

#include <utility>

#include "osa/nn/ops.hpp"
#include "osa/nn/tensor.hpp"

namespace osa::nn {

/// One LSTM layer with a linear projection of the hidden state. Gate column
/// blocks are ordered input, forget, cell, output.
template <typename S>
struct LstmLayerParams {
  Tensor<S> w_input;      // [in x 4H]
  Tensor<S> w_recurrent;  // [P x 4H], driven by the projected state
  Tensor<S> bias;         // [4H]
  Tensor<S> w_proj;       // [H x P]

  Index cell_size() const { return w_proj.rows(); }
  Index proj_size() const { return w_proj.cols(); }
};

template <typename S>
struct LstmState {
  RowMatrix<S> projected;  // [B x P]
  RowMatrix<S> cell;       // [B x H]
};

/// Runs a projected LSTM layer over a time-major batch. x holds T*batch rows
/// (row t*batch + b is time t of sequence b). Returns the projected outputs
/// for every step and the final state. The initial state is a constant
/// (zeros when omitted).
template <typename S>
std::pair<Tensor<S>, LstmState<S>> LstmProjected(Tape<S> &tape, const Tensor<S> &x, Index batch,
                                                 const LstmLayerParams<S> &p,
                                                 const LstmState<S> *initial = nullptr) {
  const Index H = p.cell_size(), P = p.proj_size();
  Require(batch >= 1 && x.rows() % batch == 0, ErrorCode::kShapeMismatch, "lstm: rows not a multiple of batch");
  Require(x.cols() == p.w_input.rows(), ErrorCode::kShapeMismatch,
          "lstm: input " + ShapeString(x.shape()) + " vs w_input " + ShapeString(p.w_input.shape()));
  Require(p.w_input.cols() == 4 * H && p.w_recurrent.rows() == P && p.w_recurrent.cols() == 4 * H &&
              p.bias.size() == 4 * H,
          ErrorCode::kShapeMismatch, "lstm: inconsistent parameter shapes");
  const Index T = x.rows() / batch;
  Require(T >= 1, ErrorCode::kShapeMismatch, "lstm: empty sequence");

  RowMatrix<S> r0 = initial ? initial->projected : RowMatrix<S>::Zero(batch, P);
  RowMatrix<S> c0 = initial ? initial->cell : RowMatrix<S>::Zero(batch, H);
  Require(r0.rows() == batch && r0.cols() == P && c0.rows() == batch && c0.cols() == H,
          ErrorCode::kShapeMismatch, "lstm: initial state shape");

  RowMatrix<S> gates = x.value() * p.w_input.value();
  gates.rowwise() += Eigen::Map<const RowVector<S>>(p.bias.value().data(), 4 * H);
  RowMatrix<S> cells(T * batch, H), tanh_cells(T * batch, H), hidden(T * batch, H), out(T * batch, P);

  for (Index t = 0; t < T; ++t) {
    auto a = gates.middleRows(t * batch, batch);
    if (t == 0)
      a.noalias() += r0 * p.w_recurrent.value();
    else
      a.noalias() += out.middleRows((t - 1) * batch, batch) * p.w_recurrent.value();
    a.leftCols(2 * H) = a.leftCols(2 * H).unaryExpr([](S v) { return detail::Sigmoid(v); });
    a.middleCols(2 * H, H) = a.middleCols(2 * H, H).array().tanh().matrix();
    a.rightCols(H) = a.rightCols(H).unaryExpr([](S v) { return detail::Sigmoid(v); });
    const auto c_prev = t == 0 ? c0.topRows(batch) : cells.middleRows((t - 1) * batch, batch);
    cells.middleRows(t * batch, batch) = a.middleCols(H, H).cwiseProduct(c_prev) +
                                         a.leftCols(H).cwiseProduct(a.middleCols(2 * H, H));
    tanh_cells.middleRows(t * batch, batch) = cells.middleRows(t * batch, batch).array().tanh().matrix();
    hidden.middleRows(t * batch, batch) = a.rightCols(H).cwiseProduct(tanh_cells.middleRows(t * batch, batch));
    out.middleRows(t * batch, batch).noalias() = hidden.middleRows(t * batch, batch) * p.w_proj.value();
  }

  LstmState<S> final_state{out.bottomRows(batch), cells.bottomRows(batch)};
  const bool tracked = tape.Tracks(x, p.w_input, p.w_recurrent, p.bias, p.w_proj);
  Tensor<S> result = Tensor<S>::FromMatrix(std::move(out), tracked);
  if (tracked) {
    tape.Record([x, p, result, batch, T, H, P, r0 = std::move(r0), c0 = std::move(c0),
                 gates = std::move(gates), cells = std::move(cells), tanh_cells = std::move(tanh_cells),
                 hidden = std::move(hidden)] {
      const auto &d_out = result.grad();
      const auto &outv = result.value();
      RowMatrix<S> d_gates(T * batch, 4 * H);
      RowMatrix<S> dr_next = RowMatrix<S>::Zero(batch, P);
      RowMatrix<S> dc_next = RowMatrix<S>::Zero(batch, H);
      RowMatrix<S> d_proj = RowMatrix<S>::Zero(H, P);
      for (Index t = T - 1; t >= 0; --t) {
        const Index r = t * batch;
        RowMatrix<S> dr = d_out.middleRows(r, batch) + dr_next;
        d_proj.noalias() += hidden.middleRows(r, batch).transpose() * dr;
        RowMatrix<S> dh = dr * p.w_proj.value().transpose();
        const auto g = gates.middleRows(r, batch);
        const auto i_g = g.leftCols(H).array();
        const auto f_g = g.middleCols(H, H).array();
        const auto c_g = g.middleCols(2 * H, H).array();
        const auto o_g = g.rightCols(H).array();
        const auto tc = tanh_cells.middleRows(r, batch).array();
        const auto c_prev = t == 0 ? c0.topRows(batch) : cells.middleRows(r - batch, batch);
        RowMatrix<S> dc = dc_next;
        dc.array() += dh.array() * o_g * (S(1) - tc.square());
        auto da = d_gates.middleRows(r, batch);
        da.leftCols(H).array() = dc.array() * c_g * i_g * (S(1) - i_g);
        da.middleCols(H, H).array() = dc.array() * c_prev.array() * f_g * (S(1) - f_g);
        da.middleCols(2 * H, H).array() = dc.array() * i_g * (S(1) - c_g.square());
        da.rightCols(H).array() = dh.array() * tc * o_g * (S(1) - o_g);
        dc_next = dc.cwiseProduct(g.middleCols(H, H));
        dr_next.noalias() = da * p.w_recurrent.value().transpose();
      }
      if (p.w_proj.requires_grad()) p.w_proj.grad() += d_proj;
      if (p.w_recurrent.requires_grad()) {
        auto &dw = p.w_recurrent.grad();
        dw.noalias() += r0.transpose() * d_gates.topRows(batch);
        if (T > 1) dw.noalias() += outv.topRows((T - 1) * batch).transpose() * d_gates.bottomRows((T - 1) * batch);
      }
      if (p.bias.requires_grad()) {
        RowVector<S> db = d_gates.colwise().sum();
        Eigen::Map<RowVector<S>>(p.bias.grad().data(), 4 * H) += db;
      }
      if (p.w_input.requires_grad()) p.w_input.grad().noalias() += x.value().transpose() * d_gates;
      if (x.requires_grad()) x.grad().noalias() += d_gates * p.w_input.value().transpose();
    });
  }
  return {result, std::move(final_state)};
}

}  // namespace osa::nn
