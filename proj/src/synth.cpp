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

#include "fsbv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fsbv/error.hpp"
#include "fsbv/rng.hpp"

namespace fsbv {
namespace fs = std::filesystem;
namespace {

constexpr double kMargin = 20.0;  // base vertices stay this far from the border

double SegmentDistance(double px, double py, const Point2& a, const Point2& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = px - (a.x + t * dx), ey = py - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

std::vector<Polyline> Jitter(const std::vector<Polyline>& base, double sigma, Rng& rng) {
  const double shift_x = 0.5 * sigma * rng.normal(), shift_y = 0.5 * sigma * rng.normal();
  std::vector<Polyline> out = base;
  for (Polyline& line : out) {
    for (Point2& p : line) {
      p.x = std::clamp(p.x + shift_x + sigma * rng.normal(), 2.0, kStandardSize - 3.0);
      p.y = std::clamp(p.y + shift_y + sigma * rng.normal(), 2.0, kStandardSize - 3.0);
    }
  }
  return out;
}

std::string Numbered(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (classes == 0 || genuine == 0 || forged == 0 || strokes == 0 || points_per_stroke < 2) {
    Fail(ErrorKind::kInvalidArgument,
         "synth: classes, genuine, forged and strokes must be >= 1, points per stroke >= 2");
  }
  if (!(genuine_jitter >= 0.0 && genuine_jitter < forged_jitter)) {
    Fail(ErrorKind::kInvalidArgument, "synth: genuine jitter must be below forged jitter");
  }
  if (!(stroke_radius > 0.0)) Fail(ErrorKind::kInvalidArgument, "synth: stroke radius must be positive");
}

ImageSample RenderStrokes(const std::vector<Polyline>& strokes, double radius) {
  const std::size_t n = kStandardSize;
  std::vector<double> ink(n * n, 0.0);
  for (const Polyline& line : strokes) {
    for (std::size_t s = 0; s + 1 < line.size(); ++s) {
      const Point2 a = line[s], b = line[s + 1];
      const double reach = radius + 1.0;
      const auto lo = [&](double v) {
        return static_cast<std::size_t>(std::clamp(std::floor(v - reach), 0.0, n - 1.0));
      };
      const auto hi = [&](double v) {
        return static_cast<std::size_t>(std::clamp(std::ceil(v + reach), 0.0, n - 1.0));
      };
      for (std::size_t y = lo(std::min(a.y, b.y)); y <= hi(std::max(a.y, b.y)); ++y) {
        for (std::size_t x = lo(std::min(a.x, b.x)); x <= hi(std::max(a.x, b.x)); ++x) {
          const double d = SegmentDistance(static_cast<double>(x), static_cast<double>(y), a, b);
          const double v = std::clamp(radius + 0.5 - d, 0.0, 1.0);
          ink[y * n + x] = std::max(ink[y * n + x], v);
        }
      }
    }
  }
  Tensor pixels({1, n, n});
  for (std::size_t i = 0; i < n * n; ++i) pixels.data()[i] = 1.0 - ink[i];
  return MakeImage(std::move(pixels));
}

std::vector<SynthClass> synth_render(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthClass> out;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    Rng rng(DeriveSeed(spec.seed, c));
    SynthClass cls;
    cls.id = "s" + Numbered(c);
    for (std::size_t s = 0; s < spec.strokes; ++s) {
      Polyline line;
      for (std::size_t p = 0; p < spec.points_per_stroke; ++p) {
        line.push_back({kMargin + rng.uniform01() * (kStandardSize - 2 * kMargin),
                        kMargin + rng.uniform01() * (kStandardSize - 2 * kMargin)});
      }
      cls.base.push_back(std::move(line));
    }
    cls.base_image = RenderStrokes(cls.base, spec.stroke_radius);
    cls.base_image.subject_id = cls.id;
    for (std::size_t i = 0; i < spec.genuine; ++i) {
      ImageSample img = RenderStrokes(Jitter(cls.base, spec.genuine_jitter, rng), spec.stroke_radius);
      img.subject_id = cls.id;
      img.label = Genuineness::kGenuine;
      cls.genuine.push_back(std::move(img));
    }
    for (std::size_t i = 0; i < spec.forged; ++i) {
      ImageSample img = RenderStrokes(Jitter(cls.base, spec.forged_jitter, rng), spec.stroke_radius);
      img.subject_id = cls.id;
      img.label = Genuineness::kForged;
      cls.forged.push_back(std::move(img));
    }
    out.push_back(std::move(cls));
  }
  return out;
}

DatasetManifest synth_generate(const SynthSpec& spec, const fs::path& out) {
  const auto classes = synth_render(spec);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) Fail(ErrorKind::kIo, "synth: cannot create " + out.string() + ": " + ec.message());
  for (const SynthClass& cls : classes) {
    for (const char* kind : {"genuine", "forged"}) {
      const fs::path dir = out / cls.id / kind;
      fs::create_directories(dir, ec);
      if (ec) Fail(ErrorKind::kIo, "synth: cannot create " + dir.string() + ": " + ec.message());
      const auto& images = std::string(kind) == "genuine" ? cls.genuine : cls.forged;
      for (std::size_t i = 0; i < images.size(); ++i) WritePng(dir / (Numbered(i) + ".png"), images[i]);
    }
  }
  return load_dataset(out);
}

}  // namespace fsbv
