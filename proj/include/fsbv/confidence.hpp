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

#include <cmath>

namespace fsbv {

/// Tanh gain that makes tanh(k * limit) == limit, i.e. the two branches of
/// the piecewise scaling meet exactly at +-limit.
inline double ContinuousTanhGain(double inner_limit) {
  return std::atanh(inner_limit) / inner_limit;
}

/// Piecewise scaling applied to one-class distances before the inverse
/// sigmoid. Distances are small in practice, so the inner band is stretched.
struct ScalingConfig {
  double inner_limit = 0.98;
  double tanh_gain = ContinuousTanhGain(0.98);

  /// |tanh(k * limit) - limit|; zero for the continuous gain.
  double continuity_gap() const {
    return std::abs(std::tanh(tanh_gain * inner_limit) - inner_limit);
  }
  /// Throws unless limit > 0, gain > 0 and the branches meet within 1e-3.
  void validate() const;
};

struct ConfidenceFactor {
  double value = 0.5;     // O in (0, 1), used as the relation-score threshold
  double distance = 0.0;  // raw one-class decision value
  double scaled = 0.0;    // distance after scale_distance
};

/// |d| > inner_limit: identity; otherwise tanh(k * d). Odd and increasing.
double scale_distance(double d, const ScalingConfig& config = {});

/// O = 1 - sigmoid(scale_distance(d)). Positive (genuine-side) distances give
/// a low threshold, negative ones a high threshold.
ConfidenceFactor confidence_factor(double d, const ScalingConfig& config = {});

}  // namespace fsbv
