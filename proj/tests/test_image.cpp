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
#include <filesystem>

#include "fsbv/error.hpp"
#include "fsbv/image.hpp"
#include "fsbv/rng.hpp"

using namespace fsbv;

namespace {

ImageSample Solid(std::size_t c, std::size_t h, std::size_t w, std::array<double, 3> rgb) {
  Tensor t(Shape{c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) t[ch * h * w + i] = rgb[ch];
  return MakeImage(std::move(t));
}

}  // namespace

TEST_CASE("to_grayscale") {
  CHECK(to_grayscale(Solid(3, 4, 4, {1, 1, 1})).at(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(to_grayscale(Solid(3, 4, 4, {1, 0, 0})).at(2, 3) == doctest::Approx(0.299));
  ImageSample gray = Solid(1, 3, 3, {0.4, 0, 0});
  CHECK(to_grayscale(gray).pixels == gray.pixels);
  CHECK_THROWS_AS(to_grayscale(Solid(2, 3, 3, {0, 0, 0})), Error);
}

TEST_CASE("resize_128") {
  ImageSample constant = Solid(1, 40, 70, {0.37, 0, 0});
  ImageSample up = resize_128(constant);
  REQUIRE(up.pixels.shape() == Shape{1, 128, 128});
  for (double v : up.pixels.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));

  Rng rng(31);
  Tensor t(Shape{3, 128, 128});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform01();
  ImageSample same = MakeImage(t);
  CHECK(resize_128(same).pixels == t);

  CHECK_THROWS_AS(resize_128(Solid(1, 1, 5, {0, 0, 0})), Error);
}

TEST_CASE("resize_128 bilinear blend at the center of a 2x2 checkerboard") {
  ImageSample board = MakeImage(Tensor(Shape{1, 2, 2}, std::vector<double>{1, 0, 0, 1}));
  ImageSample up = resize_128(board);
  // Half-pixel centers: output index i samples source coordinate (i + 0.5) / 64 - 0.5.
  for (std::size_t y : {63u, 64u}) {
    for (std::size_t x : {63u, 64u}) {
      const double fy = (y + 0.5) / 64.0 - 0.5, fx = (x + 0.5) / 64.0 - 0.5;
      const double expected = (1 - fy) * (1 - fx) * 1.0 + (1 - fy) * fx * 0.0 +
                              fy * (1 - fx) * 0.0 + fy * fx * 1.0;
      CHECK(up.at(y, x) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
  for (double v : up.pixels.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normalize_input") {
  NormalizationStats stats;
  ImageSample at_mean = Solid(3, 128, 128, stats.mean);
  for (double v : normalize_input(at_mean, stats).values()) CHECK(std::abs(v) < 1e-15);

  ImageSample a = Solid(1, 128, 128, {0.8, 0, 0});
  ImageSample b = Solid(1, 128, 128, {0.3, 0, 0});
  const double diff = normalize_input(a)[100] - normalize_input(b)[100];
  CHECK(diff == doctest::Approx(0.5 / stats.gray_stddev()).epsilon(1e-12));
  CHECK(normalize_input(Solid(1, 2, 2, {stats.gray_mean(), 0, 0}))[0] == doctest::Approx(0.0));
}

TEST_CASE("standardize produces 128x128 with requested channels") {
  ImageSample rgb = Solid(3, 50, 60, {0.2, 0.4, 0.6});
  CHECK(standardize(rgb, 1).pixels.shape() == Shape{1, 128, 128});
  CHECK(standardize(rgb, 3).pixels.shape() == Shape{3, 128, 128});
  CHECK(standardize(Solid(1, 50, 60, {0.2, 0, 0}), 3).pixels.shape() == Shape{3, 128, 128});
}

TEST_CASE("PNG round trip keeps 8-bit values") {
  const auto dir = std::filesystem::temp_directory_path() / "fsbv_test_png";
  std::filesystem::create_directories(dir);
  Rng rng(32);
  for (std::size_t c : {1u, 3u}) {
    Tensor t(Shape{c, 9, 11});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_index(256) / 255.0;
    ImageSample img = MakeImage(t);
    const auto path = dir / ("img" + std::to_string(c) + ".png");
    WritePng(path, img);
    ImageSample back = ReadPng(path);
    REQUIRE(back.pixels.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.pixels[i] == t[i]);
  }
  CHECK_THROWS_AS(ReadPng(dir / "missing.png"), Error);
  std::filesystem::remove_all(dir);
}
