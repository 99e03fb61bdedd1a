// Copyright 2026 The fsbv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fsbv/tensor.hpp"

namespace fsbv {

/// A learnable tensor together with its gradient accumulator. A frozen
/// parameter enters tapes as a constant, so it never receives gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // empty until the first backward pass reaches it
  bool frozen = false;

  void zero_grad() { grad = Tensor(); }
};

enum class Mode { kTrain, kEval };

/// Batch-norm running statistics; empty tensors mean "never accumulated".
struct RunningStats {
  Tensor mean;
  Tensor var;

  bool ready() const { return !mean.empty() && !var.empty(); }
  bool operator==(const RunningStats&) const = default;
};

struct BatchNormOptions {
  double epsilon = 1e-5;
  double momentum = 0.1;
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Records executed primitives so gradients can be replayed in exact
/// reverse order. Not thread-safe; one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  Var constant(Tensor value);
  /// Constant that refers to caller-owned storage; it must outlive the tape.
  Var constant_ref(const Tensor& value);
  Var parameter(Parameter& param);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward root w.r.t. `v`; empty if unreachable.
  /// Intermediate gradients are released during backward, leaves are kept.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Reverse-mode pass from a scalar root. Parameter gradients accumulate
  /// across calls until Parameter::zero_grad().
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& last_backward_order() const { return backward_order_; }

  void set_check_finite(bool enabled) { check_finite_ = enabled; }

  // Op-author interface.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);
  /// Zero-initialized gradient buffer for `v`, allocated on first use.
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> backward_order_;
  bool check_finite_ = true;
};

namespace ag {

/// [N,C,H,W] * [Co,C,3,3] cross-correlation, stride 1. `bias` may be invalid.
Var conv2d(Tape& tape, Var input, Var kernel, Var bias, std::size_t padding,
           std::size_t stride = 1);
Var batch_norm2d(Tape& tape, Var input, Var gamma, Var beta, Mode mode,
                 RunningStats& stats, const BatchNormOptions& options = {});
Var relu(Tape& tape, Var input);
/// 2x2 window, stride 2; ties route to the first cell in row-major order.
Var max_pool2d(Tape& tape, Var input);
/// [N,Din] or [Din] times weight [Dout,Din] plus bias [Dout].
Var linear(Tape& tape, Var input, Var weight, Var bias);
Var sigmoid(Tape& tape, Var input);
Var mse_loss(Tape& tape, Var prediction, Var target);
/// [N,...] -> [N, prod(...)].
Var flatten(Tape& tape, Var input);
/// Channel-axis concatenation of [N,C1,H,W] and [N,C2,H,W].
Var concat_channels(Tape& tape, Var a, Var b);
/// Slice [begin,end) along axis 1 of a tensor of rank >= 2.
Var slice_axis1(Tape& tape, Var input, std::size_t begin, std::size_t end);
/// out[p] = a[pairs[p].first] + b[pairs[p].second], batching on axis 0.
Var pair_sum(Tape& tape, Var a, Var b,
             const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

}  // namespace ag

// Eager single-sample helpers over plain tensors.
Tensor Conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t padding, std::size_t stride = 1);
Tensor BatchNorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, Mode mode,
                   RunningStats& stats, const BatchNormOptions& options = {});
Tensor Relu(const Tensor& input);
Tensor MaxPool2d(const Tensor& input);
Tensor Linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor Sigmoid(const Tensor& input);
double MseLoss(const Tensor& prediction, const Tensor& target);
double SigmoidScalar(double x);

}  // namespace fsbv
