// osa/nn/parameters.hpp

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

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "osa/error.hpp"
#include "osa/nn/tensor.hpp"

namespace osa::nn {

/// Named, ordered parameters plus Adam moments and the optimizer step count.
template <typename S>
class ParameterStore {
 public:
  struct Slot {
    std::string name;
    Tensor<S> param;
    RowMatrix<S> m;
    RowMatrix<S> v;
  };

  Tensor<S> Add(const std::string &name, const Shape &shape) {
    Require(!index_.count(name), ErrorCode::kInvalidArgument, "duplicate parameter " + name);
    Slot slot;
    slot.name = name;
    slot.param = Tensor<S>::Zeros(shape, true);
    slot.m = RowMatrix<S>::Zero(slot.param.rows(), slot.param.cols());
    slot.v = RowMatrix<S>::Zero(slot.param.rows(), slot.param.cols());
    index_[name] = slots_.size();
    slots_.push_back(std::move(slot));
    return slots_.back().param;
  }

  bool Contains(const std::string &name) const { return index_.count(name) > 0; }

  const Tensor<S> &Get(const std::string &name) const {
    auto it = index_.find(name);
    Require(it != index_.end(), ErrorCode::kInvalidArgument, "no parameter named " + name);
    return slots_[it->second].param;
  }

  void ZeroGrad() {
    for (auto &s : slots_) s.param.ZeroGrad();
  }

  std::vector<Slot> &slots() { return slots_; }
  const std::vector<Slot> &slots() const { return slots_; }
  size_t size() const { return slots_.size(); }

  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t n) { step_count_ = n; }

  Index NumScalars() const {
    Index n = 0;
    for (const auto &s : slots_) n += s.param.size();
    return n;
  }

 private:
  std::vector<Slot> slots_;
  std::map<std::string, size_t> index_;
  int64_t step_count_ = 0;
};

/// Fills a parameter with uniform(-bound, bound) draws.
template <typename S>
void InitUniform(const Tensor<S> &t, double bound, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto &v = t.mutable_value();
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<S>(dist(rng));
}

/// Default weight init: uniform(+-sqrt(1/fan_in)).
template <typename S>
void InitFanIn(const Tensor<S> &t, Index fan_in, std::mt19937_64 &rng) {
  InitUniform(t, std::sqrt(1.0 / static_cast<double>(fan_in)), rng);
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of every parameter; increments step_count.
template <typename S>
void AdamStep(ParameterStore<S> &store, double lr, const AdamOptions &opt = {}) {
  const int64_t step = store.step_count() + 1;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (auto &slot : store.slots()) {
    const auto &g = slot.param.grad();
    slot.m = static_cast<S>(opt.beta1) * slot.m + static_cast<S>(1.0 - opt.beta1) * g;
    slot.v = static_cast<S>(opt.beta2) * slot.v + static_cast<S>(1.0 - opt.beta2) * g.cwiseAbs2();
    auto &w = slot.param.mutable_value();
    for (Index i = 0; i < w.size(); ++i) {
      const double m_hat = slot.m.data()[i] / c1;
      const double v_hat = slot.v.data()[i] / c2;
      w.data()[i] -= static_cast<S>(lr * m_hat / (std::sqrt(v_hat) + opt.epsilon));
    }
  }
  store.set_step_count(step);
}

/// Step-decay schedule: initial_lr * 0.5^floor(step / halve_every).
inline double LrSchedule(int64_t step, double initial_lr, int64_t halve_every) {
  Require(step >= 0 && halve_every > 0, ErrorCode::kInvalidArgument, "lr_schedule: bad arguments");
  return initial_lr * std::pow(0.5, static_cast<double>(step / halve_every));
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
template <typename S>
double ClipGradNorm(ParameterStore<S> &store, double max_norm) {
  double sq = 0.0;
  for (auto &slot : store.slots()) sq += static_cast<double>(slot.param.grad().squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (auto &slot : store.slots()) slot.param.grad() *= scale;
  }
  return norm;
}

}  // namespace osa::nn
