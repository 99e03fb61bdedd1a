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

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fsbv/error.hpp"
#include "fsbv/orb.hpp"
#include "fsbv/rng.hpp"

using namespace fsbv;

namespace {

ImageSample Blank(double value = 0.0) {
  return MakeImage(Tensor(Shape{1, 128, 128}, value));
}

ImageSample BrightSquare(int x0, int y0, int size) {
  ImageSample img = Blank();
  for (int y = y0; y < y0 + size; ++y)
    for (int x = x0; x < x0 + size; ++x) img.pixels.at(0, y, x) = 1.0;
  return img;
}

// Independent segment test: try every start position on the circle.
bool OracleFast9(const ImageSample& img, int x, int y, double t) {
  static const int dx[16] = {0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1};
  static const int dy[16] = {-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3};
  const double c = img.at(y, x);
  for (int start = 0; start < 16; ++start) {
    bool all_bright = true, all_dark = true;
    for (int k = 0; k < 9; ++k) {
      const int i = (start + k) % 16;
      const double v = img.at(y + dy[i], x + dx[i]);
      all_bright = all_bright && v > c + t;
      all_dark = all_dark && v < c - t;
    }
    if (all_bright || all_dark) return true;
  }
  return false;
}

// Rotation by +90 degrees about (64, 64): (x, y) -> (128 - y, x).
ImageSample Rotate90(const ImageSample& img) {
  ImageSample out = Blank();
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const int nx = 128 - y, ny = x;
      if (nx >= 0 && nx < 128) out.pixels.at(0, ny, nx) = img.at(y, x);
    }
  return out;
}

ImageSample CornerPatch() {
  // Asymmetric structure around (64, 64): an L-shaped stroke plus a blob.
  ImageSample img = Blank(0.1);
  for (int y = 50; y < 80; ++y)
    for (int x = 50; x < 80; ++x) {
      double v = 0.1;
      if ((x >= 60 && x < 64 && y >= 52) || (y >= 72 && y < 76 && x >= 60)) v = 0.9;
      const double d2 = (x - 70.0) * (x - 70.0) + (y - 58.0) * (y - 58.0);
      v += 0.5 * std::exp(-d2 / 10.0);
      img.pixels.at(0, y, x) = std::min(v, 1.0);
    }
  return img;
}

}  // namespace

TEST_CASE("fast_detect on a constant image is empty") {
  CHECK(fast_detect(Blank(0.5), 0.08).empty());
}

TEST_CASE("fast_detect finds the vertices of a bright square") {
  ImageSample img = BrightSquare(60, 60, 5);
  const auto kps = fast_detect(img, 0.08);
  CHECK(kps.size() == 4);
  for (const Keypoint& kp : kps) CHECK(OracleFast9(img, kp.x, kp.y, 0.08));
  const int vx[4] = {60, 64, 60, 64}, vy[4] = {60, 60, 64, 64};
  for (int v = 0; v < 4; ++v) {
    INFO("vertex " << vx[v] << "," << vy[v]);
    bool near = false;
    for (const Keypoint& kp : kps) near = near || (std::abs(kp.x - vx[v]) <= 1 && std::abs(kp.y - vy[v]) <= 1);
    CHECK(near);
  }
  // Every oracle corner away from the square survives only if it is a local maximum,
  // so the detector never reports more points than the oracle finds.
  int oracle_count = 0;
  for (int y = kBorderMargin; y < 128 - kBorderMargin; ++y)
    for (int x = kBorderMargin; x < 128 - kBorderMargin; ++x) oracle_count += OracleFast9(img, x, y, 0.08);
  CHECK(static_cast<int>(kps.size()) <= oracle_count);
}

TEST_CASE("fast_detect honors the cap, ordering and margin") {
  Rng rng(41);
  ImageSample noise = Blank();
  for (std::size_t i = 0; i < noise.pixels.size(); ++i) noise.pixels[i] = rng.uniform01();
  OrbConfig config;
  config.max_keypoints = 25;
  const auto kps = fast_detect(noise, 0.08, config);
  CHECK(kps.size() == 25);
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].response >= kps[i].response);
  for (const Keypoint& kp : kps) {
    CHECK(kp.x >= kBorderMargin);
    CHECK(kp.y >= kBorderMargin);
    CHECK(kp.x < 128 - kBorderMargin);
    CHECK(kp.y < 128 - kBorderMargin);
  }
  CHECK_THROWS_AS(fast_detect(MakeImage(Tensor(Shape{3, 128, 128}, 0.0)), 0.08), Error);
}

TEST_CASE("orb_orientation") {
  SUBCASE("radially symmetric patch has angle zero") {
    ImageSample img = Blank();
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const double d2 = (x - 64.0) * (x - 64.0) + (y - 64.0) * (y - 64.0);
        img.pixels.at(0, y, x) = std::exp(-d2 / 50.0);
      }
    CHECK(orb_orientation(img, Keypoint{64, 64, 0}) == 0.0);
  }
  SUBCASE("ramps") {
    ImageSample horizontal = Blank(), vertical = Blank();
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        horizontal.pixels.at(0, y, x) = x / 127.0;
        vertical.pixels.at(0, y, x) = y / 127.0;
      }
    // Direct summation of the moments over the radius-15 disc.
    double m10 = 0, m01 = 0;
    for (int dy = -15; dy <= 15; ++dy)
      for (int dx = -15; dx <= 15; ++dx)
        if (dx * dx + dy * dy <= 225) {
          m10 += dx * horizontal.at(64 + dy, 64 + dx);
          m01 += dy * horizontal.at(64 + dy, 64 + dx);
        }
    CHECK(std::abs(m01) < 1e-9);
    CHECK(m10 > 0);
    CHECK(std::abs(orb_orientation(horizontal, Keypoint{64, 64, 0})) < 1e-9);
    CHECK(orb_orientation(vertical, Keypoint{64, 64, 0}) ==
          doctest::Approx(std::numbers::pi / 2).epsilon(1e-9));
  }
}

TEST_CASE("brief_describe") {
  ImageSample img = CornerPatch();
  ImageSample smooth = BoxBlur5(img);
  const Keypoint kp{64, 64, 1.0};
  const double angle = orb_orientation(img, kp);
  const BinaryDescriptor a = brief_describe(smooth, kp, angle);
  const BinaryDescriptor b = brief_describe(smooth, kp, angle);
  CHECK(a.bits == b.bits);

  const BinaryDescriptor flat = brief_describe(BoxBlur5(Blank(0.6)), kp, 0.3);
  for (auto word : flat.bits) CHECK(word == 0u);

  CHECK_THROWS_AS(brief_describe(smooth, Keypoint{5, 64, 0}, 0.0), Error);
  CHECK_THROWS_AS(brief_describe(smooth, Keypoint{64, 120, 0}, 0.0), Error);
}

TEST_CASE("brief_describe is compensated under a 90 degree rotation") {
  ImageSample img = CornerPatch();
  ImageSample rot = Rotate90(img);
  const Keypoint kp{64, 64, 0};
  const double angle = orb_orientation(img, kp);
  const double angle_rot = orb_orientation(rot, kp);
  CHECK(std::remainder(angle_rot - angle - std::numbers::pi / 2, 2 * std::numbers::pi) ==
        doctest::Approx(0.0).epsilon(1e-9));
  const BinaryDescriptor a = brief_describe(BoxBlur5(img), kp, angle);
  const BinaryDescriptor b = brief_describe(BoxBlur5(rot), kp, angle_rot);
  CHECK(HammingDistance(a, b) < 64);
  // The same pattern without compensation disagrees far more.
  const BinaryDescriptor raw = brief_describe(BoxBlur5(rot), kp, angle);
  CHECK(HammingDistance(a, raw) > HammingDistance(a, b));
}

TEST_CASE("orb_extract") {
  CHECK(orb_extract(Blank(0.2)).empty());

  Rng rng(42);
  ImageSample noise = Blank();
  for (std::size_t i = 0; i < noise.pixels.size(); ++i) noise.pixels[i] = rng.uniform01();
  const OrbResult first = orb_extract(noise);
  const OrbResult second = orb_extract(noise);
  CHECK(!first.empty());
  CHECK(first.descriptors.size() <= 500);
  REQUIRE(first.descriptors.size() == second.descriptors.size());
  for (std::size_t i = 0; i < first.descriptors.size(); ++i) {
    CHECK(first.descriptors[i].bits == second.descriptors[i].bits);
    CHECK(first.descriptors[i].x >= kBorderMargin);
    CHECK(first.descriptors[i].y < 128 - kBorderMargin);
  }
  ImageSample rgb = MakeImage(Tensor(Shape{3, 128, 128}, 0.0));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 128 * 128; ++i) rgb.pixels[c * 128 * 128 + i] = noise.pixels[i];
  CHECK(orb_extract(rgb).descriptors.size() == first.descriptors.size());
}

TEST_CASE("binary descriptors: squared Euclidean distance equals Hamming distance") {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    BinaryDescriptor a, b;
    for (int w = 0; w < 4; ++w) {
      a.bits[w] = rng.next_u64();
      b.bits[w] = rng.next_u64();
    }
    const auto ra = a.to_real(), rb = b.to_real();
    double sq = 0.0;
    for (std::size_t i = 0; i < 256; ++i) sq += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    CHECK(sq == static_cast<double>(HammingDistance(a, b)));
  }
}
