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

#include "fsbv/adam.hpp"

#include <cmath>

#include "fsbv/error.hpp"

namespace fsbv {

void Adam::step(const std::vector<Parameter*>& params) {
  if (first_.empty()) {
    first_.resize(params.size());
    second_.resize(params.size());
  }
  if (first_.size() != params.size()) {
    Fail(ErrorKind::kInvalidArgument, "adam: parameter list changed between steps");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correct1 = 1.0 - std::pow(options_.beta1, t);
  const double correct2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.frozen || p.grad.empty()) continue;
    RequireSameShape(p.value, p.grad, "adam gradient");
    if (first_[i].empty()) {
      first_[i] = Tensor(p.value.shape(), 0.0);
      second_[i] = Tensor(p.value.shape(), 0.0);
    }
    RequireSameShape(p.value, first_[i], "adam moments");
    auto m = first_[i].data();
    auto v = second_[i].data();
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * g[k];
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * g[k] * g[k];
      const double mhat = m[k] / correct1;
      const double vhat = v[k] / correct2;
      w[k] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

}  // namespace fsbv
