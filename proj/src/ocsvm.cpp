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

#include "fsbv/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsbv/error.hpp"

namespace fsbv {

double rbf_kernel(const RealVector& x, const RealVector& y, double gamma) {
  if (x.size() != y.size()) {
    Fail(ErrorKind::kShapeMismatch, "rbf_kernel: dimensions " + std::to_string(x.size()) +
                                        " and " + std::to_string(y.size()) + " differ");
  }
  return std::exp(-gamma * SquaredDistance(x, y));
}

double DefaultGamma(const std::vector<RealVector>& features) {
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const RealVector& f : features) {
    for (double v : f) {
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  if (count == 0) return 1.0;
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
  const double dims = static_cast<double>(features.front().size());
  return var > 0.0 ? 1.0 / (dims * var) : 1.0;
}

OcsvmModel ocsvm_fit(const std::vector<RealVector>& features, const OcsvmOptions& options) {
  const std::size_t l = features.size();
  if (l < 2) {
    Fail(ErrorKind::kInsufficientData,
         "ocsvm_fit: need at least 2 samples, got " + std::to_string(l));
  }
  if (!(options.nu > 0.0 && options.nu <= 1.0)) {
    Fail(ErrorKind::kInvalidArgument, "ocsvm_fit: nu must be in (0, 1]");
  }
  const std::size_t dims = features.front().size();
  for (const RealVector& f : features) {
    if (f.size() != dims) Fail(ErrorKind::kShapeMismatch, "ocsvm_fit: ragged feature set");
    for (double v : f) {
      if (!std::isfinite(v)) Fail(ErrorKind::kNonFinite, "ocsvm_fit: non-finite feature");
    }
  }
  const double gamma = options.gamma.value_or(DefaultGamma(features));
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    Fail(ErrorKind::kInvalidArgument, "ocsvm_fit: gamma must be positive");
  }

  std::vector<double> q(l * l);
  for (std::size_t i = 0; i < l; ++i) {
    q[i * l + i] = 1.0;
    for (std::size_t j = i + 1; j < l; ++j) {
      q[i * l + j] = q[j * l + i] = rbf_kernel(features[i], features[j], gamma);
    }
  }

  const double c = 1.0 / (options.nu * static_cast<double>(l));
  std::vector<double> alpha(l, 1.0 / static_cast<double>(l)), g(l, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < l; ++j) g[i] += q[i * l + j] * alpha[j];
  }
  // Bounds are compared with a relative slack so that 1/l == C counts as "at C".
  const double slack = 1e-12 * c;
  auto below_upper = [&](std::size_t i) { return alpha[i] < c - slack; };
  auto above_lower = [&](std::size_t i) { return alpha[i] > slack; };

  std::size_t iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    std::size_t up = l, low = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (below_upper(t) && (up == l || g[t] < g[up])) up = t;
      if (above_lower(t) && (low == l || g[t] > g[low])) low = t;
    }
    violation = (up == l || low == l) ? 0.0 : g[low] - g[up];
    if (violation < options.tolerance) break;
    if (iter >= options.max_iterations) {
      Fail(ErrorKind::kNotConverged, "ocsvm_fit: no convergence after " + std::to_string(iter) +
                                         " iterations, KKT residual " + std::to_string(violation));
    }
    // Shift mass from `low` to `up` along the exact line minimum, clipped to the box.
    const double curvature =
        std::max(q[up * l + up] + q[low * l + low] - 2.0 * q[up * l + low], 1e-12);
    double delta = violation / curvature;
    delta = std::min({delta, c - alpha[up], alpha[low]});
    alpha[up] += delta;
    alpha[low] -= delta;
    for (std::size_t t = 0; t < l; ++t) g[t] += delta * (q[t * l + up] - q[t * l + low]);
  }

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lower = -std::numeric_limits<double>::infinity();  // max G over alpha at C
  double upper = std::numeric_limits<double>::infinity();   // min G over alpha at 0
  for (std::size_t t = 0; t < l; ++t) {
    if (!below_upper(t)) {
      lower = std::max(lower, g[t]);
    } else if (!above_lower(t)) {
      upper = std::min(upper, g[t]);
    } else {
      free_sum += g[t];
      ++free_count;
    }
  }
  OcsvmModel model;
  if (free_count > 0) {
    model.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.rho = 0.5 * (lower + upper);
  } else {
    model.rho = std::isfinite(lower) ? lower : upper;
  }
  model.gamma = gamma;
  model.nu = options.nu;
  model.iterations = iter;
  for (std::size_t t = 0; t < l; ++t) {
    if (alpha[t] > 1e-12) {
      model.support_vectors.push_back(features[t]);
      model.alphas.push_back(alpha[t]);
    }
  }
  return model;
}

double ocsvm_decision(const OcsvmModel& model, const RealVector& x) {
  if (x.size() != model.dims()) {
    Fail(ErrorKind::kShapeMismatch, "ocsvm_decision: expected dimension " +
                                        std::to_string(model.dims()) + ", got " +
                                        std::to_string(x.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < model.alphas.size(); ++i) {
    s += model.alphas[i] * rbf_kernel(model.support_vectors[i], x, model.gamma);
  }
  return s - model.rho;
}

double OcsvmDualObjective(const OcsvmModel& model) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.alphas.size(); ++i) {
    for (std::size_t j = 0; j < model.alphas.size(); ++j) {
      s += model.alphas[i] * model.alphas[j] *
           rbf_kernel(model.support_vectors[i], model.support_vectors[j], model.gamma);
    }
  }
  return 0.5 * s;
}

}  // namespace fsbv
