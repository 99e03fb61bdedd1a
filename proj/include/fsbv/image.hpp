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
#include <filesystem>
#include <string>

#include "fsbv/tensor.hpp"

namespace fsbv {

enum class Genuineness { kGenuine, kForged, kUnknown };

constexpr std::size_t kStandardSize = 128;

/// Image as [C,H,W] with values in [0,1], C in {1,3}.
struct ImageSample {
  Tensor pixels;
  std::string subject_id;
  Genuineness label = Genuineness::kUnknown;

  std::size_t channels() const { return pixels.dim(0); }
  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }
  double at(std::size_t y, std::size_t x) const { return pixels.at(0, y, x); }
};

ImageSample MakeImage(Tensor pixels, std::string subject_id = {},
                      Genuineness label = Genuineness::kUnknown);

/// Luma 0.299R + 0.587G + 0.114B; grayscale input is returned unchanged.
ImageSample to_grayscale(const ImageSample& image);

/// Bilinear resampling with half-pixel centers and edge clamping.
ImageSample resize_bilinear(const ImageSample& image, std::size_t height, std::size_t width);
ImageSample resize_128(const ImageSample& image);

/// Resize to 128x128 and, when `channels` is 1, convert to grayscale.
ImageSample standardize(const ImageSample& image, std::size_t channels);

/// Reference per-channel statistics; grayscale uses the channel averages.
struct NormalizationStats {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> stddev{0.229, 0.224, 0.225};

  double gray_mean() const { return (mean[0] + mean[1] + mean[2]) / 3.0; }
  double gray_stddev() const { return (stddev[0] + stddev[1] + stddev[2]) / 3.0; }
};

/// Per-channel (x - mean) / std as a network input tensor.
Tensor normalize_input(const ImageSample& image, const NormalizationStats& stats = {});

/// 8-bit grayscale or RGB PNG. Alpha is discarded; palette images expand.
ImageSample ReadPng(const std::filesystem::path& path);
/// Quantizes to 8 bits with round-to-nearest.
void WritePng(const std::filesystem::path& path, const ImageSample& image);

}  // namespace fsbv
