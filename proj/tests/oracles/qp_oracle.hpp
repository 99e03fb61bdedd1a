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

// Dense accelerated projected-gradient solver for the one-class dual
//   min 1/2 a^T K a  s.t. 0 <= a_i <= C, sum a = 1.

#include <algorithm>
#include <cmath>
#include <vector>

namespace fsbv::oracle {

// Euclidean projection onto the capped simplex by bisection on the shift.
inline std::vector<double> ProjectCappedSimplex(const std::vector<double>& v, double cap) {
  double lo = *std::min_element(v.begin(), v.end()) - cap - 1.0;
  double hi = *std::max_element(v.begin(), v.end()) + 1.0;
  auto mass = [&](double tau) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - tau, 0.0, cap);
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  std::vector<double> out(v.size());
  const double tau = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] - tau, 0.0, cap);
  return out;
}

struct QpSolution {
  std::vector<double> alpha;
  double objective = 0.0;
  double rho = 0.0;
};

inline QpSolution SolveOneClassDual(const std::vector<std::vector<double>>& k, double cap,
                                    int iterations = 40000) {
  const std::size_t n = k.size();
  double lipschitz = 0.0;
  for (const auto& row : k) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    lipschitz = std::max(lipschitz, s);
  }
  std::vector<double> x(n, 1.0 / n), y = x, grad(n);
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = 0.0;
      for (std::size_t j = 0; j < n; ++j) grad[i] += k[i][j] * y[j];
    }
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = y[i] - grad[i] / lipschitz;
    const std::vector<double> next = ProjectCappedSimplex(step, cap);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) y[i] = next[i] + (t - 1.0) / t_next * (next[i] - x[i]);
    x = next;
    t = t_next;
  }
  QpSolution sol;
  sol.alpha = x;
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i] += k[i][j] * x[j];
  for (std::size_t i = 0; i < n; ++i) sol.objective += 0.5 * x[i] * g[i];
  double sum = 0.0;
  int free = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 1e-6 && x[i] < cap - 1e-6) {
      sum += g[i];
      ++free;
    }
  }
  sol.rho = free > 0 ? sum / free : 0.0;
  return sol;
}

}  // namespace fsbv::oracle
