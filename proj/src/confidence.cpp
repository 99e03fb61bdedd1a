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

#include "fsbv/confidence.hpp"

#include <string>

#include "fsbv/autograd.hpp"
#include "fsbv/error.hpp"

namespace fsbv {

void ScalingConfig::validate() const {
  if (!(inner_limit > 0.0) || !std::isfinite(inner_limit)) {
    Fail(ErrorKind::kInvalidArgument, "scaling.inner_limit must be positive");
  }
  if (!(tanh_gain > 0.0) || !std::isfinite(tanh_gain)) {
    Fail(ErrorKind::kInvalidArgument, "scaling.tanh_gain must be positive");
  }
  if (!(continuity_gap() < 1e-3)) {
    Fail(ErrorKind::kInvalidArgument,
         "scaling branches do not meet at the inner limit (gap " +
             std::to_string(continuity_gap()) + " >= 1e-3)");
  }
}

double scale_distance(double d, const ScalingConfig& config) {
  if (!std::isfinite(d)) Fail(ErrorKind::kNonFinite, "scale_distance: distance is not finite");
  if (std::abs(d) > config.inner_limit) return d;
  return std::tanh(config.tanh_gain * d);
}

ConfidenceFactor confidence_factor(double d, const ScalingConfig& config) {
  ConfidenceFactor out;
  out.distance = d;
  out.scaled = scale_distance(d, config);
  out.value = 1.0 - SigmoidScalar(out.scaled);
  return out;
}

}  // namespace fsbv
