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

#include "fsbv/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "fsbv/error.hpp"

namespace fsbv {

ImageSample MakeImage(Tensor pixels, std::string subject_id, Genuineness label) {
  if (pixels.rank() != 3) {
    Fail(ErrorKind::kShapeMismatch, "image must be [C,H,W], got " + ShapeString(pixels.shape()));
  }
  return ImageSample{std::move(pixels), std::move(subject_id), label};
}

ImageSample to_grayscale(const ImageSample& image) {
  const std::size_t c = image.channels();
  if (c == 1) return image;
  if (c != 3) {
    Fail(ErrorKind::kInvalidArgument,
         "to_grayscale: unsupported channel count " + std::to_string(c));
  }
  const std::size_t h = image.height(), w = image.width();
  Tensor out(Shape{1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      out.at(0, y, x) = 0.299 * image.pixels.at(0, y, x) + 0.587 * image.pixels.at(1, y, x) +
                        0.114 * image.pixels.at(2, y, x);
    }
  }
  return ImageSample{std::move(out), image.subject_id, image.label};
}

ImageSample resize_bilinear(const ImageSample& image, std::size_t height, std::size_t width) {
  const std::size_t c = image.channels(), h = image.height(), w = image.width();
  if (h < 2 || w < 2) {
    Fail(ErrorKind::kInvalidArgument,
         "resize: degenerate input " + std::to_string(h) + "x" + std::to_string(w));
  }
  if (h == height && w == width) return image;
  Tensor out(Shape{c, height, width});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t oy = 0; oy < height; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 2);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < width; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 2);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1.0 - tx) * image.pixels.at(ch, y0, x0) +
                           tx * image.pixels.at(ch, y0, x0 + 1);
        const double bottom = (1.0 - tx) * image.pixels.at(ch, y0 + 1, x0) +
                              tx * image.pixels.at(ch, y0 + 1, x0 + 1);
        out.at(ch, oy, ox) = std::clamp((1.0 - ty) * top + ty * bottom, 0.0, 1.0);
      }
    }
  }
  return ImageSample{std::move(out), image.subject_id, image.label};
}

ImageSample resize_128(const ImageSample& image) {
  return resize_bilinear(image, kStandardSize, kStandardSize);
}

ImageSample standardize(const ImageSample& image, std::size_t channels) {
  if (channels != 1 && channels != 3) {
    Fail(ErrorKind::kInvalidArgument, "standardize: channels must be 1 or 3");
  }
  ImageSample out = resize_128(image);
  if (channels == 1) return to_grayscale(out);
  if (out.channels() == 1) {
    Tensor rgb(Shape{3, kStandardSize, kStandardSize});
    for (std::size_t ch = 0; ch < 3; ++ch) {
      std::copy(out.pixels.data().begin(), out.pixels.data().end(),
                rgb.data().begin() + static_cast<long>(ch * kStandardSize * kStandardSize));
    }
    out.pixels = std::move(rgb);
  }
  return out;
}

Tensor normalize_input(const ImageSample& image, const NormalizationStats& stats) {
  const std::size_t c = image.channels();
  Tensor out = image.pixels;
  const std::size_t plane = image.height() * image.width();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double mean = c == 1 ? stats.gray_mean() : stats.mean[ch];
    const double inv = 1.0 / (c == 1 ? stats.gray_stddev() : stats.stddev[ch]);
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out[ch * plane + i];
      v = (v - mean) * inv;
    }
  }
  return out;
}

ImageSample ReadPng(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    Fail(ErrorKind::kDecode, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t c = color ? 3 : 1;
  const std::size_t h = png.height, w = png.width;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    std::string message = png.message;
    png_image_free(&png);
    Fail(ErrorKind::kDecode, "cannot decode PNG " + path.string() + ": " + message);
  }
  Tensor pixels(Shape{c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        pixels.at(ch, y, x) = buffer[(y * w + x) * c + ch] / 255.0;
      }
    }
  }
  return ImageSample{std::move(pixels), {}, Genuineness::kUnknown};
}

void WritePng(const std::filesystem::path& path, const ImageSample& image) {
  const std::size_t c = image.channels(), h = image.height(), w = image.width();
  if (c != 1 && c != 3) Fail(ErrorKind::kInvalidArgument, "WritePng: channels must be 1 or 3");
  std::vector<png_byte> buffer(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image.pixels.at(ch, y, x), 0.0, 1.0);
        buffer[(y * w + x) * c + ch] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    Fail(ErrorKind::kIo, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace fsbv
