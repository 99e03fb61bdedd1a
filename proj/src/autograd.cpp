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

#include "fsbv/autograd.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsbv/error.hpp"

namespace fsbv {

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::constant_ref(const Tensor& value) {
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Parameter& param) {
  Node node;
  node.external = &param.value;
  if (!param.frozen) {
    node.param = &param;
    node.requires_grad = true;
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& node = nodes_.at(v.id);
  return node.external ? *node.external : node.owned;
}

const Tensor& Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

Tensor& Tape::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.empty()) node.grad = Tensor(value(v).shape(), 0.0);
  return node.grad;
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (check_finite_ && !value.all_finite()) {
    Fail(ErrorKind::kNonFinite, "non-finite value produced at tape node " +
                                    std::to_string(nodes_.size()));
  }
  Node node;
  node.owned = std::move(value);
  for (Var in : inputs) node.requires_grad = node.requires_grad || nodes_.at(in.id).requires_grad;
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    Fail(ErrorKind::kShapeMismatch,
         "backward root must be scalar, got shape " + ShapeString(value(loss).shape()));
  }
  for (Node& node : nodes_) node.grad = Tensor();
  backward_order_.clear();
  if (!nodes_.at(loss.id).requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (check_finite_ && !node.grad.all_finite()) {
      Fail(ErrorKind::kNonFinite, "non-finite gradient at tape node " + std::to_string(i));
    }
    backward_order_.push_back(i);
    if (node.param != nullptr) {
      Parameter& p = *node.param;
      if (p.grad.empty()) p.grad = Tensor(p.value.shape(), 0.0);
      auto dst = p.grad.data();
      auto src = node.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    if (node.backward) {
      node.backward(*this, Var{i});
      nodes_[i].grad = Tensor();
    }
  }
}

namespace ag {
namespace {

void Require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) Fail(kind, what);
}

void Im2Col(const double* img, std::size_t channels, std::size_t h, std::size_t w,
            std::size_t pad, std::size_t out_h, std::size_t out_w, double* col) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = col + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long iy = static_cast<long>(oy + ky) - static_cast<long>(pad);
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = img + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long ix = static_cast<long>(ox + kx) - static_cast<long>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void Col2ImAdd(const double* col, std::size_t channels, std::size_t h, std::size_t w,
               std::size_t pad, std::size_t out_h, std::size_t out_w, double* img) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = col + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long iy = static_cast<long>(oy + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = img + (c * h + static_cast<std::size_t>(iy)) * w;
          const double* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long ix = static_cast<long>(ox + kx) - static_cast<long>(pad);
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

double StableSigmoid(double x) {
  constexpr double kLow = std::numeric_limits<double>::min();
  constexpr double kHigh = 1.0 - 0x1.0p-53;
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, kLow, kHigh);
}

}  // namespace

Var conv2d(Tape& tape, Var input, Var kernel, Var bias, std::size_t padding,
           std::size_t stride) {
  const Tensor& x = tape.value(input);
  const Tensor& k = tape.value(kernel);
  Require(stride == 1, ErrorKind::kInvalidArgument, "conv2d: only stride 1 is supported");
  Require(padding <= 1, ErrorKind::kInvalidArgument, "conv2d: padding must be 0 or 1");
  Require(x.rank() == 4, ErrorKind::kShapeMismatch,
          "conv2d: input must be [N,C,H,W], got " + ShapeString(x.shape()));
  Require(k.rank() == 4 && k.dim(2) == 3 && k.dim(3) == 3, ErrorKind::kShapeMismatch,
          "conv2d: kernel must be [Co,Ci,3,3], got " + ShapeString(k.shape()));
  Require(k.dim(1) == x.dim(1), ErrorKind::kShapeMismatch,
          "conv2d: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
              std::to_string(k.dim(1)));
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  Require(h + 2 * padding >= 3 && w + 2 * padding >= 3, ErrorKind::kShapeMismatch,
          "conv2d: input smaller than kernel");
  const std::size_t cout = k.dim(0);
  const std::size_t out_h = h + 2 * padding - 2, out_w = w + 2 * padding - 2;
  const std::size_t plane = out_h * out_w, rows = cin * 9;
  if (bias.valid()) {
    Require(tape.value(bias).shape() == Shape{cout}, ErrorKind::kShapeMismatch,
            "conv2d: bias must be [" + std::to_string(cout) + "]");
  }

  Tensor out(Shape{n, cout, out_h, out_w}, 0.0);
  std::vector<double> col(rows * plane);
  for (std::size_t i = 0; i < n; ++i) {
    Im2Col(x.data().data() + i * cin * h * w, cin, h, w, padding, out_h, out_w, col.data());
    double* dst = out.data().data() + i * cout * plane;
    if (bias.valid()) {
      const Tensor& b = tape.value(bias);
      for (std::size_t c = 0; c < cout; ++c) std::fill(dst + c * plane, dst + (c + 1) * plane, b[c]);
    }
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(cout),
                static_cast<int>(plane), static_cast<int>(rows), 1.0, k.data().data(),
                static_cast<int>(rows), col.data(), static_cast<int>(plane), 1.0, dst,
                static_cast<int>(plane));
  }

  std::vector<Var> inputs{input, kernel};
  if (bias.valid()) inputs.push_back(bias);
  return tape.record(std::move(out), std::move(inputs), [=](Tape& t, Var self) {
    const Tensor& x = t.value(input);
    const Tensor& k = t.value(kernel);
    const Tensor& g = t.grad(self);
    std::vector<double> col(rows * plane), dcol;
    const bool need_k = t.requires_grad(kernel);
    const bool need_x = t.requires_grad(input);
    double* dk = need_k ? t.grad_buffer(kernel).data().data() : nullptr;
    double* dx = need_x ? t.grad_buffer(input).data().data() : nullptr;
    if (need_x) dcol.resize(rows * plane);
    for (std::size_t i = 0; i < n; ++i) {
      const double* gi = g.data().data() + i * cout * plane;
      if (need_k) {
        Im2Col(x.data().data() + i * cin * h * w, cin, h, w, padding, out_h, out_w, col.data());
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(cout),
                    static_cast<int>(rows), static_cast<int>(plane), 1.0, gi,
                    static_cast<int>(plane), col.data(), static_cast<int>(plane), 1.0, dk,
                    static_cast<int>(rows));
      }
      if (need_x) {
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(rows),
                    static_cast<int>(plane), static_cast<int>(cout), 1.0, k.data().data(),
                    static_cast<int>(rows), gi, static_cast<int>(plane), 0.0, dcol.data(),
                    static_cast<int>(plane));
        Col2ImAdd(dcol.data(), cin, h, w, padding, out_h, out_w, dx + i * cin * h * w);
      }
    }
    if (bias.valid() && t.requires_grad(bias)) {
      Tensor& db = t.grad_buffer(bias);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < cout; ++c) {
          const double* gp = g.data().data() + (i * cout + c) * plane;
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += gp[p];
          db[c] += s;
        }
      }
    }
  });
}

Var batch_norm2d(Tape& tape, Var input, Var gamma, Var beta, Mode mode,
                 RunningStats& stats, const BatchNormOptions& options) {
  const Tensor& x = tape.value(input);
  Require(x.rank() == 4, ErrorKind::kShapeMismatch,
          "batch_norm2d: input must be [N,C,H,W], got " + ShapeString(x.shape()));
  const std::size_t n = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  const Tensor& gm = tape.value(gamma);
  const Tensor& bt = tape.value(beta);
  Require(gm.shape() == Shape{channels} && bt.shape() == Shape{channels},
          ErrorKind::kShapeMismatch,
          "batch_norm2d: gamma/beta must be [" + std::to_string(channels) + "], got " +
              ShapeString(gm.shape()) + " and " + ShapeString(bt.shape()));
  const double eps = options.epsilon;
  const double count = static_cast<double>(n * plane);

  std::vector<double> mean(channels), inv_std(channels);
  if (mode == Mode::kTrain) {
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data().data() + (i * channels + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) s += p[j];
      }
      const double mu = s / count;
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data().data() + (i * channels + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) ss += (p[j] - mu) * (p[j] - mu);
      }
      const double var = ss / count;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      if (!stats.ready()) {
        stats.mean = Tensor(Shape{channels}, 0.0);
        stats.var = Tensor(Shape{channels}, 1.0);
      }
      const double unbiased = count > 1.0 ? ss / (count - 1.0) : var;
      stats.mean[c] = (1.0 - options.momentum) * stats.mean[c] + options.momentum * mu;
      stats.var[c] = (1.0 - options.momentum) * stats.var[c] + options.momentum * unbiased;
    }
  } else {
    Require(stats.ready(), ErrorKind::kInvalidArgument,
            "batch_norm2d: eval mode requires accumulated running statistics");
    Require(stats.mean.shape() == Shape{channels}, ErrorKind::kShapeMismatch,
            "batch_norm2d: running statistics have wrong channel count");
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = stats.mean[c];
      inv_std[c] = 1.0 / std::sqrt(stats.var[c] + eps);
    }
  }

  Tensor normalized(x.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (i * channels + c) * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        const double xh = (x[off + j] - mean[c]) * inv_std[c];
        normalized[off + j] = xh;
        out[off + j] = gm[c] * xh + bt[c];
      }
    }
  }

  return tape.record(std::move(out), {input, gamma, beta},
                     [=, xhat = std::move(normalized)](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    const Tensor& gm = t.value(gamma);
    std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t off = (i * channels + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          sum_g[c] += g[off + j];
          sum_gx[c] += g[off + j] * xhat[off + j];
        }
      }
    }
    if (t.requires_grad(gamma)) {
      Tensor& dg = t.grad_buffer(gamma);
      for (std::size_t c = 0; c < channels; ++c) dg[c] += sum_gx[c];
    }
    if (t.requires_grad(beta)) {
      Tensor& db = t.grad_buffer(beta);
      for (std::size_t c = 0; c < channels; ++c) db[c] += sum_g[c];
    }
    if (t.requires_grad(input)) {
      Tensor& dx = t.grad_buffer(input);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t off = (i * channels + c) * plane;
          const double scale = gm[c] * inv_std[c];
          if (mode == Mode::kTrain) {
            const double mg = sum_g[c] / count, mgx = sum_gx[c] / count;
            for (std::size_t j = 0; j < plane; ++j) {
              dx[off + j] += scale * (g[off + j] - mg - xhat[off + j] * mgx);
            }
          } else {
            for (std::size_t j = 0; j < plane; ++j) dx[off + j] += scale * g[off + j];
          }
        }
      }
    }
  });
}

Var relu(Tape& tape, Var input) {
  const Tensor& x = tape.value(input);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return tape.record(std::move(out), {input}, [=](Tape& t, Var self) {
    const Tensor& x = t.value(input);
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var max_pool2d(Tape& tape, Var input) {
  const Tensor& x = tape.value(input);
  Require(x.rank() == 4, ErrorKind::kShapeMismatch,
          "max_pool2d: input must be [N,C,H,W], got " + ShapeString(x.shape()));
  const std::size_t n = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  Require(h % 2 == 0 && w % 2 == 0, ErrorKind::kShapeMismatch,
          "max_pool2d: spatial dims must be even, got " + ShapeString(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(Shape{n, channels, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < n * channels; ++p) {
    const double* src = x.data().data() + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (2 * oy + dy) * w + 2 * ox + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = src[best];
        argmax[o] = p * h * w + best;
      }
    }
  }
  return tape.record(std::move(out), {input}, [=, argmax = std::move(argmax)](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += g[o];
  });
}

Var linear(Tape& tape, Var input, Var weight, Var bias) {
  const Tensor& x = tape.value(input);
  const Tensor& wt = tape.value(weight);
  const Tensor& b = tape.value(bias);
  Require(wt.rank() == 2, ErrorKind::kShapeMismatch, "linear: weight must be [Dout,Din]");
  const std::size_t dout = wt.dim(0), din = wt.dim(1);
  Require(x.rank() == 1 || x.rank() == 2, ErrorKind::kShapeMismatch,
          "linear: input must be [Din] or [N,Din]");
  const bool batched = x.rank() == 2;
  const std::size_t n = batched ? x.dim(0) : 1;
  const std::size_t xin = batched ? x.dim(1) : x.dim(0);
  Require(xin == din, ErrorKind::kShapeMismatch,
          "linear: input dim " + std::to_string(xin) + " does not match weight " +
              ShapeString(wt.shape()));
  Require(b.shape() == Shape{dout}, ErrorKind::kShapeMismatch,
          "linear: bias must be [" + std::to_string(dout) + "]");
  Tensor out(batched ? Shape{n, dout} : Shape{dout});
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data().data() + i * din;
    for (std::size_t o = 0; o < dout; ++o) {
      const double* wo = wt.data().data() + o * din;
      double s = b[o];
      for (std::size_t d = 0; d < din; ++d) s += wo[d] * xi[d];
      out[i * dout + o] = s;
    }
  }
  return tape.record(std::move(out), {input, weight, bias}, [=](Tape& t, Var self) {
    const Tensor& x = t.value(input);
    const Tensor& wt = t.value(weight);
    const Tensor& g = t.grad(self);
    if (t.requires_grad(weight)) {
      Tensor& dw = t.grad_buffer(weight);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < dout; ++o) {
          const double go = g[i * dout + o];
          double* row = dw.data().data() + o * din;
          const double* xi = x.data().data() + i * din;
          for (std::size_t d = 0; d < din; ++d) row[d] += go * xi[d];
        }
      }
    }
    if (t.requires_grad(bias)) {
      Tensor& db = t.grad_buffer(bias);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < dout; ++o) db[o] += g[i * dout + o];
      }
    }
    if (t.requires_grad(input)) {
      Tensor& dx = t.grad_buffer(input);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < dout; ++o) {
          const double go = g[i * dout + o];
          const double* row = wt.data().data() + o * din;
          double* dxi = dx.data().data() + i * din;
          for (std::size_t d = 0; d < din; ++d) dxi[d] += go * row[d];
        }
      }
    }
  });
}

Var sigmoid(Tape& tape, Var input) {
  const Tensor& x = tape.value(input);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = StableSigmoid(x[i]);
  Tensor saved = out;
  return tape.record(std::move(out), {input}, [=, y = std::move(saved)](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var mse_loss(Tape& tape, Var prediction, Var target) {
  const Tensor& p = tape.value(prediction);
  const Tensor& y = tape.value(target);
  RequireSameShape(p, y, "mse_loss");
  const double count = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return tape.record(Tensor::Scalar(s / count), {prediction, target}, [=](Tape& t, Var self) {
    const Tensor& p = t.value(prediction);
    const Tensor& y = t.value(target);
    const double g = t.grad(self)[0];
    if (t.requires_grad(prediction)) {
      Tensor& dp = t.grad_buffer(prediction);
      for (std::size_t i = 0; i < p.size(); ++i) dp[i] += g * 2.0 * (p[i] - y[i]) / count;
    }
    if (t.requires_grad(target)) {
      Tensor& dy = t.grad_buffer(target);
      for (std::size_t i = 0; i < p.size(); ++i) dy[i] -= g * 2.0 * (p[i] - y[i]) / count;
    }
  });
}

Var flatten(Tape& tape, Var input) {
  const Tensor& x = tape.value(input);
  Require(x.rank() >= 2, ErrorKind::kShapeMismatch, "flatten: input must have a batch axis");
  Tensor out = x.reshaped(Shape{x.dim(0), x.size() / x.dim(0)});
  return tape.record(std::move(out), {input}, [=](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  });
}

Var concat_channels(Tape& tape, Var a, Var b) {
  const Tensor& ta = tape.value(a);
  const Tensor& tb = tape.value(b);
  Require(ta.rank() == 4 && tb.rank() == 4 && ta.dim(0) == tb.dim(0) && ta.dim(2) == tb.dim(2) &&
              ta.dim(3) == tb.dim(3),
          ErrorKind::kShapeMismatch,
          "concat_channels: incompatible shapes " + ShapeString(ta.shape()) + " and " +
              ShapeString(tb.shape()));
  const std::size_t n = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  const std::size_t plane = ta.dim(2) * ta.dim(3);
  Tensor out(Shape{n, ca + cb, ta.dim(2), ta.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(ta.data().data() + i * ca * plane, ca * plane,
                out.data().data() + i * (ca + cb) * plane);
    std::copy_n(tb.data().data() + i * cb * plane, cb * plane,
                out.data().data() + (i * (ca + cb) + ca) * plane);
  }
  return tape.record(std::move(out), {a, b}, [=](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) {
      Tensor& da = t.grad_buffer(a);
      for (std::size_t i = 0; i < n; ++i) {
        const double* src = g.data().data() + i * (ca + cb) * plane;
        double* dst = da.data().data() + i * ca * plane;
        for (std::size_t k = 0; k < ca * plane; ++k) dst[k] += src[k];
      }
    }
    if (t.requires_grad(b)) {
      Tensor& db = t.grad_buffer(b);
      for (std::size_t i = 0; i < n; ++i) {
        const double* src = g.data().data() + (i * (ca + cb) + ca) * plane;
        double* dst = db.data().data() + i * cb * plane;
        for (std::size_t k = 0; k < cb * plane; ++k) dst[k] += src[k];
      }
    }
  });
}

Var slice_axis1(Tape& tape, Var input, std::size_t begin, std::size_t end) {
  const Tensor& x = tape.value(input);
  Require(x.rank() >= 2 && begin < end && end <= x.dim(1), ErrorKind::kShapeMismatch,
          "slice_axis1: invalid range for shape " + ShapeString(x.shape()));
  const std::size_t outer = x.dim(0), width = x.dim(1);
  const std::size_t inner = x.size() / (outer * width);
  Shape shape = x.shape();
  shape[1] = end - begin;
  Tensor out(shape);
  const std::size_t span = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + (o * width + begin) * inner, span,
                out.data().data() + o * span);
  }
  return tape.record(std::move(out), {input}, [=](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = g.data().data() + o * span;
      double* dst = dx.data().data() + (o * width + begin) * inner;
      for (std::size_t k = 0; k < span; ++k) dst[k] += src[k];
    }
  });
}

Var pair_sum(Tape& tape, Var a, Var b,
             const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const Tensor& ta = tape.value(a);
  const Tensor& tb = tape.value(b);
  Require(ta.rank() >= 2 && ta.rank() == tb.rank(), ErrorKind::kShapeMismatch,
          "pair_sum: operands must have equal rank");
  Shape item(ta.shape().begin() + 1, ta.shape().end());
  Require(item == Shape(tb.shape().begin() + 1, tb.shape().end()), ErrorKind::kShapeMismatch,
          "pair_sum: item shapes " + ShapeString(ta.shape()) + " and " +
              ShapeString(tb.shape()) + " differ");
  Require(!pairs.empty(), ErrorKind::kInvalidArgument, "pair_sum: no pairs");
  const std::size_t len = ShapeSize(item);
  Shape shape = ta.shape();
  shape[0] = pairs.size();
  Tensor out(shape);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    Require(pairs[p].first < ta.dim(0) && pairs[p].second < tb.dim(0),
            ErrorKind::kInvalidArgument, "pair_sum: pair index out of range");
    const double* sa = ta.data().data() + pairs[p].first * len;
    const double* sb = tb.data().data() + pairs[p].second * len;
    double* dst = out.data().data() + p * len;
    for (std::size_t k = 0; k < len; ++k) dst[k] = sa[k] + sb[k];
  }
  return tape.record(std::move(out), {a, b}, [=](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    const bool need_a = t.requires_grad(a), need_b = t.requires_grad(b);
    double* da = need_a ? t.grad_buffer(a).data().data() : nullptr;
    double* db = need_b ? t.grad_buffer(b).data().data() : nullptr;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double* src = g.data().data() + p * len;
      if (need_a) {
        double* dst = da + pairs[p].first * len;
        for (std::size_t k = 0; k < len; ++k) dst[k] += src[k];
      }
      if (need_b) {
        double* dst = db + pairs[p].second * len;
        for (std::size_t k = 0; k < len; ++k) dst[k] += src[k];
      }
    }
  });
}

}  // namespace ag

namespace {

Tensor AsBatch(const Tensor& t) {
  if (t.rank() == 3) return t.reshaped(Shape{1, t.dim(0), t.dim(1), t.dim(2)});
  return t;
}

Tensor Unbatch(Tensor t, std::size_t original_rank) {
  if (original_rank == 3) t.reshape(Shape{t.dim(1), t.dim(2), t.dim(3)});
  return t;
}

}  // namespace

Tensor Conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t padding, std::size_t stride) {
  Tape tape;
  Var out = ag::conv2d(tape, tape.constant(AsBatch(input)), tape.constant_ref(kernel),
                       tape.constant_ref(bias), padding, stride);
  return Unbatch(tape.value(out), input.rank());
}

Tensor BatchNorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, Mode mode,
                   RunningStats& stats, const BatchNormOptions& options) {
  Tape tape;
  Var out = ag::batch_norm2d(tape, tape.constant(AsBatch(input)), tape.constant_ref(gamma),
                             tape.constant_ref(beta), mode, stats, options);
  return Unbatch(tape.value(out), input.rank());
}

Tensor Relu(const Tensor& input) {
  Tape tape;
  return tape.value(ag::relu(tape, tape.constant_ref(input)));
}

Tensor MaxPool2d(const Tensor& input) {
  Tape tape;
  Var out = ag::max_pool2d(tape, tape.constant(AsBatch(input)));
  return Unbatch(tape.value(out), input.rank());
}

Tensor Linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  Tape tape;
  return tape.value(ag::linear(tape, tape.constant_ref(input), tape.constant_ref(weight),
                               tape.constant_ref(bias)));
}

Tensor Sigmoid(const Tensor& input) {
  Tape tape;
  return tape.value(ag::sigmoid(tape, tape.constant_ref(input)));
}

double MseLoss(const Tensor& prediction, const Tensor& target) {
  Tape tape;
  return tape.value(
      ag::mse_loss(tape, tape.constant_ref(prediction), tape.constant_ref(target)))[0];
}

double SigmoidScalar(double x) { return ag::StableSigmoid(x); }

}  // namespace fsbv
