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

#include "fsbv/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>

#include "fsbv/error.hpp"

namespace fsbv {

std::size_t ShapeSize(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {
  for (std::size_t d : shape_) {
    if (d == 0) Fail(ErrorKind::kInvalidArgument, "tensor dimension must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (ShapeSize(shape_) != data_.size()) {
    Fail(ErrorKind::kShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + ShapeString(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::reshape(Shape shape) {
  if (ShapeSize(shape) != data_.size()) {
    Fail(ErrorKind::kShapeMismatch,
         "cannot reshape " + ShapeString(shape_) + " to " + ShapeString(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  // Exponent bits all set means inf or NaN. Integer OR keeps the loop vectorizable.
  constexpr std::uint64_t kExponent = 0x7ff0000000000000ull;
  std::uint64_t bad = 0;
  for (double v : data_) {
    bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExponent) == kExponent);
  }
  return bad == 0;
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    Fail(ErrorKind::kShapeMismatch, std::string(what) + ": shapes " + ShapeString(a.shape()) +
                                        " and " + ShapeString(b.shape()) + " differ");
  }
}

}  // namespace fsbv
