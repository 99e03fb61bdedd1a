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
#include <cstdint>
#include <vector>

namespace fsbv {

using RealVector = std::vector<double>;

constexpr std::size_t kDefaultClusters = 100;

struct KMeansOptions {
  std::size_t max_iterations = 300;
  double shift_tolerance = 1e-6;
};

/// k centroids of equal dimension plus the inertia seen at every assignment step.
struct Codebook {
  std::vector<RealVector> centroids;
  std::vector<double> inertia_history;

  std::size_t k() const { return centroids.size(); }
  std::size_t dims() const { return centroids.empty() ? 0 : centroids.front().size(); }
};

double SquaredDistance(const RealVector& a, const RealVector& b);

/// k-means++ seeding followed by Lloyd iterations. A cluster that loses all
/// its points is reseeded at the point farthest from its current centroid.
Codebook kmeans_fit(const std::vector<RealVector>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
std::size_t kmeans_assign(const Codebook& codebook, const RealVector& point);

/// Occurrence counts per cluster divided by the descriptor count.
/// Throws kInsufficientData for an empty descriptor set.
RealVector bovw_histogram(const Codebook& codebook, const std::vector<RealVector>& descriptors);

/// Stand-in histogram for images without descriptors.
RealVector UniformHistogram(std::size_t k);

}  // namespace fsbv
