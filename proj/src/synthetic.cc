// Copyright 2026 The NTC Authors. All Rights Reserved.
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

#include "ntc/synthetic.h"

#include <algorithm>
#include <cmath>

namespace ntc {

ImagePlane GenerateDeadLeaves(const DeadLeavesConfig& cfg, Rng& rng) {
  if (cfg.width < 1 || cfg.height < 1 || cfg.min_radius <= 0 ||
      cfg.max_radius < cfg.min_radius) {
    Fail(ErrorKind::kArgument, "invalid dead-leaves configuration");
  }
  const int w = cfg.width;
  const int h = cfg.height;
  std::vector<double> value(static_cast<size_t>(w) * h, -1.0);
  size_t uncovered = value.size();
  // Radii with density proportional to r^-3, via the inverse CDF.
  const double a = 1.0 / (cfg.min_radius * cfg.min_radius);
  const double b = 1.0 / (cfg.max_radius * cfg.max_radius);
  // Disks are painted front to back; a pixel keeps the first disk that
  // covers it.
  for (int n = 0; n < cfg.max_disks && uncovered > 0; ++n) {
    const double r = 1.0 / std::sqrt(a - rng.Uniform() * (a - b));
    const double cx = rng.Uniform() * (w + 2 * r) - r;
    const double cy = rng.Uniform() * (h + 2 * r) - r;
    const double base = 0.1 + 0.8 * rng.Uniform();
    const double angle = 2.0 * 3.14159265358979323846 * rng.Uniform();
    const double gx = std::cos(angle) * cfg.shading / (2 * r);
    const double gy = std::sin(angle) * cfg.shading / (2 * r);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        if (dx * dx + dy * dy > r * r) continue;
        double& v = value[static_cast<size_t>(y) * w + x];
        if (v >= 0.0) continue;
        v = base + gx * dx + gy * dy;
        --uncovered;
      }
    }
  }
  const double background = 0.5;
  for (double& v : value) {
    if (v < 0.0) v = background;
  }
  // One pass of a [1 2 1]/4 blur softens the aliased disk edges.
  std::vector<double> tmp(value.size());
  auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      tmp[static_cast<size_t>(y) * w + x] =
          0.25 * value[static_cast<size_t>(y) * w + clampi(x - 1, w)] +
          0.5 * value[static_cast<size_t>(y) * w + x] +
          0.25 * value[static_cast<size_t>(y) * w + clampi(x + 1, w)];
    }
  }
  ImagePlane img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double s = 0.25 * tmp[static_cast<size_t>(clampi(y - 1, h)) * w + x] +
                       0.5 * tmp[static_cast<size_t>(y) * w + x] +
                       0.25 * tmp[static_cast<size_t>(clampi(y + 1, h)) * w + x];
      const double noisy = s + cfg.noise * rng.Normal();
      img.at(x, y) = std::clamp(std::round(noisy * 255.0), 0.0, 255.0) / 255.0;
    }
  }
  return img;
}

std::vector<ImagePlane> GenerateCorpus(int count, const DeadLeavesConfig& cfg,
                                       uint64_t seed) {
  Rng rng(seed);
  std::vector<ImagePlane> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(GenerateDeadLeaves(cfg, rng));
  return out;
}

}  // namespace ntc
