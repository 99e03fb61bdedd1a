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

#include "fsbv/orb.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "fsbv/error.hpp"

namespace fsbv {
namespace {

#include "brief_pattern.inc"

constexpr std::array<std::array<int, 2>, 16> kCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

constexpr int kHarrisHalfWindow = 1;

bool InsideMargin(const ImageSample& image, int x, int y) {
  const int w = static_cast<int>(image.width()), h = static_cast<int>(image.height());
  return x >= kBorderMargin && y >= kBorderMargin && x + kBorderMargin < w &&
         y + kBorderMargin < h;
}

void RequireGray(const ImageSample& image, const char* what) {
  if (image.channels() != 1) {
    Fail(ErrorKind::kInvalidArgument, std::string(what) + ": expects a grayscale image");
  }
}

}  // namespace

std::vector<double> BinaryDescriptor::to_real() const {
  std::vector<double> out(256);
  for (std::size_t i = 0; i < 256; ++i) out[i] = bit(i) ? 1.0 : 0.0;
  return out;
}

int HammingDistance(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < 4; ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
  return d;
}

bool SegmentTest(const ImageSample& gray, int x, int y, double threshold) {
  const double center = gray.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  std::array<int, 16> state{};
  for (std::size_t i = 0; i < 16; ++i) {
    const double v = gray.at(static_cast<std::size_t>(y + kCircle[i][1]),
                             static_cast<std::size_t>(x + kCircle[i][0]));
    state[i] = v > center + threshold ? 1 : (v < center - threshold ? -1 : 0);
  }
  for (int sign : {1, -1}) {
    int run = 0;
    for (std::size_t i = 0; i < 16 + 9; ++i) {
      run = state[i % 16] == sign ? run + 1 : 0;
      if (run >= 9) return true;
    }
  }
  return false;
}

double HarrisResponse(const ImageSample& gray, int x, int y) {
  auto px = [&](int xx, int yy) {
    return gray.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
  };
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int dy = -kHarrisHalfWindow; dy <= kHarrisHalfWindow; ++dy) {
    for (int dx = -kHarrisHalfWindow; dx <= kHarrisHalfWindow; ++dx) {
      const int cx = x + dx, cy = y + dy;
      const double gx = (px(cx + 1, cy - 1) + 2.0 * px(cx + 1, cy) + px(cx + 1, cy + 1)) -
                        (px(cx - 1, cy - 1) + 2.0 * px(cx - 1, cy) + px(cx - 1, cy + 1));
      const double gy = (px(cx - 1, cy + 1) + 2.0 * px(cx, cy + 1) + px(cx + 1, cy + 1)) -
                        (px(cx - 1, cy - 1) + 2.0 * px(cx, cy - 1) + px(cx + 1, cy - 1));
      sxx += gx * gx;
      syy += gy * gy;
      sxy += gx * gy;
    }
  }
  const double trace = sxx + syy;
  return sxx * syy - sxy * sxy - 0.04 * trace * trace;
}

std::vector<Keypoint> fast_detect(const ImageSample& gray, double threshold,
                                  const OrbConfig& config) {
  RequireGray(gray, "fast_detect");
  const int w = static_cast<int>(gray.width()), h = static_cast<int>(gray.height());
  std::vector<double> response(static_cast<std::size_t>(w * h), 0.0);
  std::vector<char> candidate(static_cast<std::size_t>(w * h), 0);
  for (int y = kBorderMargin; y + kBorderMargin < h; ++y) {
    for (int x = kBorderMargin; x + kBorderMargin < w; ++x) {
      if (!SegmentTest(gray, x, y, threshold)) continue;
      const std::size_t idx = static_cast<std::size_t>(y * w + x);
      candidate[idx] = 1;
      response[idx] = HarrisResponse(gray, x, y);
    }
  }

  std::vector<Keypoint> kept;
  for (int y = kBorderMargin; y + kBorderMargin < h; ++y) {
    for (int x = kBorderMargin; x + kBorderMargin < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y * w + x);
      if (!candidate[idx]) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const std::size_t n = static_cast<std::size_t>((y + dy) * w + (x + dx));
          if (!candidate[n]) continue;
          // Earlier raster neighbors win ties so exactly one survives.
          const bool earlier = n < idx;
          if (response[n] > response[idx] || (earlier && response[n] == response[idx])) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kept.push_back(Keypoint{x, y, response[idx]});
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
  if (kept.size() > config.max_keypoints) kept.resize(config.max_keypoints);
  return kept;
}

double orb_orientation(const ImageSample& gray, const Keypoint& keypoint) {
  RequireGray(gray, "orb_orientation");
  double m10 = 0.0, m01 = 0.0, mass = 0.0;
  constexpr int r = kOrientationRadius;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      const int x = keypoint.x + dx, y = keypoint.y + dy;
      if (x < 0 || y < 0 || x >= static_cast<int>(gray.width()) ||
          y >= static_cast<int>(gray.height())) {
        continue;
      }
      const double v = gray.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      m10 += dx * v;
      m01 += dy * v;
      mass += std::abs(v);
    }
  }
  const double negligible = 1e-12 * (mass + 1.0);
  if (std::abs(m10) <= negligible && std::abs(m01) <= negligible) return 0.0;
  return std::atan2(m01, m10);
}

ImageSample BoxBlur5(const ImageSample& gray) {
  RequireGray(gray, "BoxBlur5");
  const std::size_t h = gray.height(), w = gray.width();
  // Separable sums in a fixed order keep flat regions exactly flat.
  std::vector<double> rows(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t x0 = x >= 2 ? x - 2 : 0, x1 = std::min(w, x + 3);
      double sum = 0.0;
      for (std::size_t xx = x0; xx < x1; ++xx) sum += gray.at(y, xx);
      rows[y * w + x] = sum;
    }
  }
  Tensor out(Shape{1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t y0 = y >= 2 ? y - 2 : 0, y1 = std::min(h, y + 3);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t x0 = x >= 2 ? x - 2 : 0, x1 = std::min(w, x + 3);
      double sum = 0.0;
      for (std::size_t yy = y0; yy < y1; ++yy) sum += rows[yy * w + x];
      out.at(0, y, x) = sum / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }
  return ImageSample{std::move(out), gray.subject_id, gray.label};
}

BinaryDescriptor brief_describe(const ImageSample& smoothed, const Keypoint& keypoint,
                                double angle) {
  RequireGray(smoothed, "brief_describe");
  if (!InsideMargin(smoothed, keypoint.x, keypoint.y)) {
    Fail(ErrorKind::kInvalidArgument,
         "brief_describe: keypoint (" + std::to_string(keypoint.x) + "," +
             std::to_string(keypoint.y) + ") is within " + std::to_string(kBorderMargin) +
             " px of the border");
  }
  const double c = std::cos(angle), s = std::sin(angle);
  auto sample = [&](int px, int py) {
    const long rx = std::lround(c * px - s * py);
    const long ry = std::lround(s * px + c * py);
    return smoothed.at(static_cast<std::size_t>(keypoint.y + ry),
                       static_cast<std::size_t>(keypoint.x + rx));
  };
  BinaryDescriptor out;
  out.x = keypoint.x;
  out.y = keypoint.y;
  out.angle = angle;
  out.response = keypoint.response;
  for (std::size_t i = 0; i < kBriefPattern.size(); ++i) {
    const auto& p = kBriefPattern[i];
    if (sample(p[0], p[1]) < sample(p[2], p[3])) out.bits[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return out;
}

OrbResult orb_extract(const ImageSample& image, const OrbConfig& config) {
  const ImageSample gray = to_grayscale(image);
  OrbResult result;
  if (gray.width() <= 2 * kBorderMargin || gray.height() <= 2 * kBorderMargin) return result;
  const std::vector<Keypoint> keypoints = fast_detect(gray, config.fast_threshold, config);
  if (keypoints.empty()) return result;
  const ImageSample smoothed = BoxBlur5(gray);
  result.descriptors.reserve(keypoints.size());
  for (const Keypoint& kp : keypoints) {
    result.descriptors.push_back(brief_describe(smoothed, kp, orb_orientation(gray, kp)));
  }
  return result;
}

}  // namespace fsbv
