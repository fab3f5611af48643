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

// Grayscale image planes, PGM/PPM I/O, patch sampling and block tiling.

#ifndef NTC_IMAGE_H_
#define NTC_IMAGE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntc/common.h"

namespace ntc {

// Row-major array view used by the metric and training code; rows are
// image lines.
using PlaneArray =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-major intensities in [0, 1]; an 8-bit sample s maps to s / 255.
struct ImagePlane {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  ImagePlane() = default;
  ImagePlane(int w, int h, double fill = 0.0)
      : width(w), height(h), samples(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return samples[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return samples[static_cast<size_t>(y) * width + x];
  }
  size_t size() const { return samples.size(); }

  bool operator==(const ImagePlane&) const = default;
};

// Throws kStructural if the sample count or range invariant is violated.
void ValidateImage(const ImagePlane& img);

PlaneArray ToArray(const ImagePlane& img);
// Copies without range checks; callers clamp first when the result must
// satisfy the [0, 1] invariant.
ImagePlane FromArray(const PlaneArray& a);
ImagePlane ClampToUnit(const PlaneArray& a);

// BT.709 luma of an 8-bit RGB triple, normalized to [0, 1].
double Bt709Luma(uint8_t r, uint8_t g, uint8_t b);

// Accepts binary P5 (gray) and P6 (RGB, converted to luma), maxval 255.
ImagePlane DecodePnm(std::span<const uint8_t> data);
ImagePlane LoadImage(const std::string& path);

// Samples are rounded to the nearest 8-bit level. The header is always
// "P5\n<w> <h>\n255\n", so decoding and re-encoding a file written in that
// form reproduces it byte for byte.
std::vector<uint8_t> EncodePgm(const ImagePlane& img);
// Gray replicated into all three channels.
std::vector<uint8_t> EncodePpm(const ImagePlane& img);
void SavePgm(const ImagePlane& img, const std::string& path);
void SavePpm(const ImagePlane& img, const std::string& path);

// Sorted list of *.pgm / *.ppm files in `dir`.
std::vector<std::string> ListImageFiles(const std::string& dir);
std::vector<ImagePlane> LoadImageDir(const std::string& dir);

ImagePlane CropBorder(const ImagePlane& img, int margin);

// `count` square patches of side `side`, each laid out as an ImagePlane.
struct PatchBatch {
  int side = 0;
  std::vector<ImagePlane> patches;

  int count() const { return static_cast<int>(patches.size()); }
};

// Picks an image uniformly among those at least side x side, then a
// uniform valid offset. Smaller images are skipped; an empty usable corpus
// is an argument error.
PatchBatch SamplePatches(std::span<const ImagePlane> corpus, int count,
                         int side, Rng& rng);

struct BlockLayout {
  int block_side = 0;
  int width = 0;   // true image width
  int height = 0;  // true image height
  int blocks_x = 0;
  int blocks_y = 0;

  int block_count() const { return blocks_x * blocks_y; }
  int coefficients() const { return block_side * block_side; }
  bool operator==(const BlockLayout&) const = default;
};

BlockLayout MakeBlockLayout(int width, int height, int block_side);

// One flattened B x B block per column (row-major inside the block), blocks
// in raster order. Images whose size is not a multiple of B are padded by
// edge replication.
struct BlockSet {
  Matrix blocks;
  BlockLayout layout;
};

BlockSet Blockify(const ImagePlane& img, int block_side);
Matrix BlockifyArray(const PlaneArray& img, const BlockLayout& layout);
// Drops the padding; no clamping.
PlaneArray UnblockifyArray(const Matrix& blocks, const BlockLayout& layout);
ImagePlane Unblockify(const BlockSet& blocks);

}  // namespace ntc

#endif  // NTC_IMAGE_H_
