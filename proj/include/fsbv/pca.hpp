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
#include <string>
#include <vector>

#include "fsbv/bovw.hpp"
#include "fsbv/image.hpp"

namespace fsbv {

/// Principal axes of a histogram set. `components` is row-major
/// retained_dims x dims; `eigenvalues` keeps the full descending spectrum.
struct PcaBasis {
  RealVector mean;
  std::vector<double> components;
  RealVector eigenvalues;
  std::size_t retained_dims = 0;

  std::size_t dims() const { return mean.size(); }
  const double* component(std::size_t r) const { return components.data() + r * dims(); }
  /// eigenvalue / total for each component; all zero for degenerate data.
  RealVector explained_variance_ratio() const;
};

struct FeatureVector {
  RealVector values;
  std::string subject_id;
  Genuineness label = Genuineness::kUnknown;
};

constexpr double kDefaultVarianceTarget = 0.95;

/// Sample-covariance PCA keeping the shortest prefix that reaches
/// `variance_target`, at least 2 and at most min(n - 1, dims) components.
PcaBasis pca_fit(const std::vector<RealVector>& samples,
                 double variance_target = kDefaultVarianceTarget);

FeatureVector pca_project(const PcaBasis& basis, const RealVector& x);

/// mean + components^T * coords, using the first coords.size() components.
RealVector pca_reconstruct(const PcaBasis& basis, const RealVector& coords);

}  // namespace fsbv
