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

#include "fsbv/pca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fsbv/error.hpp"

namespace fsbv {
namespace {

void RequireDims(const RealVector& v, std::size_t dims, const char* what) {
  if (v.size() != dims) {
    Fail(ErrorKind::kShapeMismatch, std::string(what) + ": expected dimension " +
                                        std::to_string(dims) + ", got " + std::to_string(v.size()));
  }
}

}  // namespace

RealVector PcaBasis::explained_variance_ratio() const {
  double total = 0.0;
  for (double e : eigenvalues) total += e;
  RealVector out(eigenvalues.size(), 0.0);
  if (total <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eigenvalues[i] / total;
  return out;
}

PcaBasis pca_fit(const std::vector<RealVector>& samples, double variance_target) {
  if (samples.size() < 2) {
    Fail(ErrorKind::kInsufficientData,
         "pca_fit: need at least 2 samples, got " + std::to_string(samples.size()));
  }
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    Fail(ErrorKind::kInvalidArgument, "pca_fit: variance target must be in (0, 1]");
  }
  const std::size_t n = samples.size(), dims = samples.front().size();
  if (dims == 0) Fail(ErrorKind::kInvalidArgument, "pca_fit: zero-dimensional samples");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  for (std::size_t i = 0; i < n; ++i) {
    RequireDims(samples[i], dims, "pca_fit");
    for (std::size_t d = 0; d < dims; ++d) {
      if (!std::isfinite(samples[i][d])) Fail(ErrorKind::kNonFinite, "pca_fit: non-finite sample");
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = samples[i][d];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  // Ascending from the solver; reversed below.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    Fail(ErrorKind::kNotConverged, "pca_fit: eigendecomposition failed");
  }
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  PcaBasis basis;
  basis.mean.assign(mean.data(), mean.data() + dims);
  basis.eigenvalues.resize(dims);
  double total = 0.0;
  for (std::size_t r = 0; r < dims; ++r) {
    basis.eigenvalues[r] = std::max(0.0, values(static_cast<Eigen::Index>(dims - 1 - r)));
    total += basis.eigenvalues[r];
  }

  std::size_t prefix = dims;
  if (total > 0.0) {
    double cumulative = 0.0;
    for (std::size_t r = 0; r < dims; ++r) {
      cumulative += basis.eigenvalues[r];
      if (cumulative / total >= variance_target - 1e-12) {
        prefix = r + 1;
        break;
      }
    }
  } else {
    prefix = 1;
  }
  basis.retained_dims = std::min({std::max<std::size_t>(prefix, 2), std::max<std::size_t>(1, n - 1), dims});

  basis.components.resize(basis.retained_dims * dims);
  for (std::size_t r = 0; r < basis.retained_dims; ++r) {
    const Eigen::Index col = static_cast<Eigen::Index>(dims - 1 - r);
    // Sign convention: the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    vectors.col(col).cwiseAbs().maxCoeff(&arg);
    const double sign = vectors(arg, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t d = 0; d < dims; ++d) {
      basis.components[r * dims + d] = sign * vectors(static_cast<Eigen::Index>(d), col);
    }
  }
  return basis;
}

FeatureVector pca_project(const PcaBasis& basis, const RealVector& x) {
  RequireDims(x, basis.dims(), "pca_project");
  FeatureVector out;
  out.values.assign(basis.retained_dims, 0.0);
  for (std::size_t r = 0; r < basis.retained_dims; ++r) {
    const double* c = basis.component(r);
    double s = 0.0;
    for (std::size_t d = 0; d < basis.dims(); ++d) s += c[d] * (x[d] - basis.mean[d]);
    out.values[r] = s;
  }
  return out;
}

RealVector pca_reconstruct(const PcaBasis& basis, const RealVector& coords) {
  if (coords.size() > basis.retained_dims) {
    Fail(ErrorKind::kShapeMismatch, "pca_reconstruct: more coordinates than retained components");
  }
  RealVector out = basis.mean;
  for (std::size_t r = 0; r < coords.size(); ++r) {
    const double* c = basis.component(r);
    for (std::size_t d = 0; d < basis.dims(); ++d) out[d] += coords[r] * c[d];
  }
  return out;
}

}  // namespace fsbv
