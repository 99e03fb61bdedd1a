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
#include <optional>
#include <vector>

#include "fsbv/bovw.hpp"

namespace fsbv {

struct OcsvmOptions {
  double nu = 0.1;
  /// RBF bandwidth; unset means 1 / (dims * variance of the training entries).
  std::optional<double> gamma;
  /// Stop once the maximal KKT violation drops below this.
  double tolerance = 1e-4;
  std::size_t max_iterations = 1000000;
};

/// nu-one-class SVM in the scaling where the dual coefficients sum to one
/// and each lies in [0, 1 / (nu * l)].
struct OcsvmModel {
  std::vector<RealVector> support_vectors;
  std::vector<double> alphas;
  double rho = 0.0;
  double gamma = 1.0;
  double nu = 0.1;
  std::size_t iterations = 0;

  std::size_t dims() const {
    return support_vectors.empty() ? 0 : support_vectors.front().size();
  }
};

/// exp(-gamma * |x - y|^2).
double rbf_kernel(const RealVector& x, const RealVector& y, double gamma);

double DefaultGamma(const std::vector<RealVector>& features);

/// Pairwise working-set solver (maximal violating pair, lowest index on ties)
/// started from the uniform point alpha_i = 1 / l.
OcsvmModel ocsvm_fit(const std::vector<RealVector>& features, const OcsvmOptions& options = {});

/// sum_i alpha_i K(sv_i, x) - rho; positive on the genuine side.
double ocsvm_decision(const OcsvmModel& model, const RealVector& x);

/// Value of 1/2 alpha^T K alpha for the stored model.
double OcsvmDualObjective(const OcsvmModel& model);

}  // namespace fsbv
