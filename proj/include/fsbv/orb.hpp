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

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fsbv/image.hpp"

namespace fsbv {

struct OrbConfig {
  double fast_threshold = 0.08;  // in units of the [0,1] intensity range
  std::size_t max_keypoints = 500;
};

/// Pixels closer than this to any border are never keypoints. It covers the
/// radius-15 orientation patch and the rotated BRIEF pattern plus blur.
constexpr int kBorderMargin = 16;
constexpr int kOrientationRadius = 15;

struct Keypoint {
  int x = 0;
  int y = 0;
  double response = 0.0;  // Harris corner measure
};

struct BinaryDescriptor {
  std::array<std::uint64_t, 4> bits{};
  int x = 0;
  int y = 0;
  double angle = 0.0;
  double response = 0.0;

  bool bit(std::size_t i) const { return (bits[i / 64] >> (i % 64)) & 1u; }
  /// 256 reals in {0, 1}.
  std::vector<double> to_real() const;
};

int HammingDistance(const BinaryDescriptor& a, const BinaryDescriptor& b);

/// FAST-9 on the radius-3 Bresenham circle (16 pixels).
bool SegmentTest(const ImageSample& gray, int x, int y, double threshold);

/// Harris measure det(M) - 0.04 trace(M)^2 over a 3x3 window of Sobel gradients.
double HarrisResponse(const ImageSample& gray, int x, int y);

/// FAST-9 candidates, 3x3 non-maximum suppression on Harris response, sorted
/// by response (raster order on ties) and capped at config.max_keypoints.
std::vector<Keypoint> fast_detect(const ImageSample& gray, double threshold,
                                  const OrbConfig& config = {});

/// Intensity-centroid angle atan2(m01, m10) over a radius-15 disc; 0 when
/// both moments vanish.
double orb_orientation(const ImageSample& gray, const Keypoint& keypoint);

/// 5x5 box blur; windows are clipped at the image border.
ImageSample BoxBlur5(const ImageSample& gray);

/// Rotated BRIEF: bit i is set iff smoothed(p_a) < smoothed(p_b) for the
/// i-th pattern pair rotated by `angle`.
BinaryDescriptor brief_describe(const ImageSample& smoothed, const Keypoint& keypoint,
                                double angle);

struct OrbResult {
  std::vector<BinaryDescriptor> descriptors;
  bool empty() const { return descriptors.empty(); }
};

OrbResult orb_extract(const ImageSample& image, const OrbConfig& config = {});

}  // namespace fsbv
