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

#include "fsbv/bovw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsbv/error.hpp"
#include "fsbv/rng.hpp"

namespace fsbv {
namespace {

void RequireDims(const RealVector& v, std::size_t dims, const char* what) {
  if (v.size() != dims) {
    Fail(ErrorKind::kShapeMismatch, std::string(what) + ": expected dimension " +
                                        std::to_string(dims) + ", got " + std::to_string(v.size()));
  }
}

std::vector<RealVector> SeedPlusPlus(const std::vector<RealVector>& points, std::size_t k,
                                     Rng& rng) {
  const std::size_t n = points.size();
  std::vector<RealVector> centers;
  centers.reserve(k);
  // floor(u * n) rather than uniform_index so that duplicated data maps to the same picks.
  centers.push_back(points[std::min(n - 1, static_cast<std::size_t>(rng.uniform01() * n))]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = SquaredDistance(points[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double d : nearest) total += d;
    std::size_t pick = n;
    const double target = rng.uniform01() * total;
    if (total > 0.0) {
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += nearest[i];
        if (nearest[i] > 0.0 && cumulative > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = std::min(n - 1, static_cast<std::size_t>(target * n));
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], SquaredDistance(points[i], centers.back()));
    }
  }
  return centers;
}

}  // namespace

double SquaredDistance(const RealVector& a, const RealVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Codebook kmeans_fit(const std::vector<RealVector>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k == 0) Fail(ErrorKind::kInvalidArgument, "kmeans_fit: k must be positive");
  if (points.size() < k) {
    Fail(ErrorKind::kInsufficientData, "kmeans_fit: " + std::to_string(points.size()) +
                                           " descriptors for k=" + std::to_string(k));
  }
  const std::size_t n = points.size(), dims = points.front().size();
  for (const RealVector& p : points) {
    RequireDims(p, dims, "kmeans_fit");
    for (double v : p) {
      if (!std::isfinite(v)) Fail(ErrorKind::kNonFinite, "kmeans_fit: non-finite descriptor");
    }
  }

  Rng rng(seed);
  Codebook book;
  book.centroids = SeedPlusPlus(points, k, rng);
  std::vector<std::size_t> assignment(n);
  std::vector<double> cost(n);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assignment[i] = kmeans_assign(book, points[i]);
      cost[i] = SquaredDistance(points[i], book.centroids[assignment[i]]);
      inertia += cost[i];
    }
    book.inertia_history.push_back(inertia);

    std::vector<RealVector> sums(k, RealVector(dims, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      RealVector& s = sums[assignment[i]];
      for (std::size_t d = 0; d < dims; ++d) s[d] += points[i][d];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
      max_shift = std::max(max_shift, std::sqrt(SquaredDistance(sums[c], book.centroids[c])));
      book.centroids[c] = std::move(sums[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (cost[i] > cost[far]) far = i;
      }
      max_shift = std::max(max_shift, std::sqrt(SquaredDistance(points[far], book.centroids[c])));
      book.centroids[c] = points[far];
      cost[far] = 0.0;
    }
    if (max_shift < options.shift_tolerance) break;
  }
  return book;
}

std::size_t kmeans_assign(const Codebook& codebook, const RealVector& point) {
  if (codebook.k() == 0) Fail(ErrorKind::kInvalidArgument, "kmeans_assign: empty codebook");
  RequireDims(point, codebook.dims(), "kmeans_assign");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < codebook.k(); ++c) {
    const double d = SquaredDistance(point, codebook.centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

RealVector bovw_histogram(const Codebook& codebook, const std::vector<RealVector>& descriptors) {
  if (descriptors.empty()) {
    Fail(ErrorKind::kInsufficientData, "bovw_histogram: image has no descriptors");
  }
  RealVector hist(codebook.k(), 0.0);
  for (const RealVector& d : descriptors) hist[kmeans_assign(codebook, d)] += 1.0;
  for (double& v : hist) v /= static_cast<double>(descriptors.size());
  return hist;
}

RealVector UniformHistogram(std::size_t k) {
  return RealVector(k, 1.0 / static_cast<double>(k));
}

}  // namespace fsbv
