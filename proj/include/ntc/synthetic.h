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

#ifndef NTC_SYNTHETIC_H_
#define NTC_SYNTHETIC_H_

#include <vector>

#include "ntc/common.h"
#include "ntc/image.h"

namespace ntc {

// Dead-leaves images: occluding disks with a power-law radius distribution
// and gently shaded interiors. Their second-order statistics are close to
// those of photographs, which makes them a usable stand-in corpus.
struct DeadLeavesConfig {
  int width = 192;
  int height = 192;
  double min_radius = 1.5;
  double max_radius = 96.0;
  int max_disks = 20000;
  double shading = 0.15;  // peak-to-peak linear shading inside a disk
  double noise = 0.01;    // additive Gaussian sensor noise
};

// Samples are quantized to 8-bit levels so the images survive a PGM
// round trip unchanged.
ImagePlane GenerateDeadLeaves(const DeadLeavesConfig& cfg, Rng& rng);
std::vector<ImagePlane> GenerateCorpus(int count, const DeadLeavesConfig& cfg,
                                       uint64_t seed);

}  // namespace ntc

#endif  // NTC_SYNTHETIC_H_
