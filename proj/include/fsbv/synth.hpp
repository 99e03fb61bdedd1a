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
#include <filesystem>
#include <vector>

#include "fsbv/dataset.hpp"
#include "fsbv/image.hpp"

namespace fsbv {

struct SynthSpec {
  std::size_t classes = 8;
  std::size_t genuine = 30;
  std::size_t forged = 15;
  std::size_t strokes = 3;
  std::size_t points_per_stroke = 5;
  double stroke_radius = 1.6;  // pixels
  double genuine_jitter = 1.5;  // per-vertex displacement stddev, pixels
  double forged_jitter = 7.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Point2 {
  double x = 0.0, y = 0.0;
};
using Polyline = std::vector<Point2>;

struct SynthClass {
  std::string id;
  std::vector<Polyline> base;
  ImageSample base_image;
  std::vector<ImageSample> genuine;
  std::vector<ImageSample> forged;
};

/// Dark strokes on a white 128x128 canvas, antialiased over one pixel.
ImageSample RenderStrokes(const std::vector<Polyline>& strokes, double radius);

std::vector<SynthClass> synth_render(const SynthSpec& spec);

/// Writes the rendered corpus under out/<id>/{genuine,forged}/NNN.png.
DatasetManifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out);

}  // namespace fsbv
