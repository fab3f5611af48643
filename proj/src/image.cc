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

#include "ntc/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>

namespace ntc {

void ValidateImage(const ImagePlane& img) {
  if (img.width < 0 || img.height < 0 ||
      img.samples.size() != static_cast<size_t>(img.width) * img.height) {
    Fail(ErrorKind::kStructural, "image sample count does not match " +
                                     std::to_string(img.width) + "x" +
                                     std::to_string(img.height));
  }
  for (size_t i = 0; i < img.samples.size(); ++i) {
    const double s = img.samples[i];
    if (!(s >= 0.0 && s <= 1.0)) {
      Fail(ErrorKind::kStructural,
           "image sample " + std::to_string(i) + " outside [0,1]");
    }
  }
}

PlaneArray ToArray(const ImagePlane& img) {
  return Eigen::Map<const PlaneArray>(img.samples.data(), img.height,
                                      img.width);
}

ImagePlane FromArray(const PlaneArray& a) {
  ImagePlane img(static_cast<int>(a.cols()), static_cast<int>(a.rows()));
  Eigen::Map<PlaneArray>(img.samples.data(), a.rows(), a.cols()) = a;
  return img;
}

ImagePlane ClampToUnit(const PlaneArray& a) {
  return FromArray(a.cwiseMax(0.0).cwiseMin(1.0));
}

double Bt709Luma(uint8_t r, uint8_t g, uint8_t b) {
  return (0.2126 * r + 0.7152 * g + 0.0722 * b) / 255.0;
}

namespace {

class PnmHeaderParser {
 public:
  explicit PnmHeaderParser(std::span<const uint8_t> data) : data_(data) {}

  int ReadInt(const char* what) {
    SkipSpaceAndComments();
    if (pos_ >= data_.size() || !std::isdigit(data_[pos_])) {
      Fail(ErrorKind::kDecode, std::string("PNM header: missing ") + what);
    }
    int64_t v = 0;
    while (pos_ < data_.size() && std::isdigit(data_[pos_])) {
      v = v * 10 + (data_[pos_++] - '0');
      if (v > (1 << 24)) {
        Fail(ErrorKind::kDecode, std::string("PNM header: ") + what +
                                     " too large");
      }
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void EndHeader() {
    if (pos_ >= data_.size() || !std::isspace(data_[pos_])) {
      Fail(ErrorKind::kDecode, "PNM header: missing raster separator");
    }
    ++pos_;
  }

  size_t position() const { return pos_; }
  void Skip(size_t n) { pos_ += n; }

 private:
  void SkipSpaceAndComments() {
    while (pos_ < data_.size()) {
      if (std::isspace(data_[pos_])) {
        ++pos_;
      } else if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

std::vector<uint8_t> EncodePnm(const ImagePlane& img, bool rgb) {
  ValidateImage(img);
  const std::string header = std::string(rgb ? "P6" : "P5") + "\n" +
                             std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.size() * (rgb ? 3 : 1));
  for (double s : img.samples) {
    const auto v = static_cast<uint8_t>(std::lround(s * 255.0));
    out.push_back(v);
    if (rgb) {
      out.push_back(v);
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace

ImagePlane DecodePnm(std::span<const uint8_t> data) {
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6')) {
    Fail(ErrorKind::kDecode, "not a binary PGM/PPM file (expected P5 or P6)");
  }
  const bool rgb = data[1] == '6';
  PnmHeaderParser parser(data);
  parser.Skip(2);
  const int width = parser.ReadInt("width");
  const int height = parser.ReadInt("height");
  const int maxval = parser.ReadInt("maxval");
  if (width <= 0 || height <= 0) {
    Fail(ErrorKind::kDecode, "PNM header: zero image dimension");
  }
  if (maxval != 255) {
    Fail(ErrorKind::kDecode,
         "unsupported bit depth: maxval " + std::to_string(maxval));
  }
  parser.EndHeader();
  const size_t channels = rgb ? 3 : 1;
  const size_t need = static_cast<size_t>(width) * height * channels;
  if (data.size() - parser.position() < need) {
    Fail(ErrorKind::kDecode, "truncated PNM payload: need " +
                                 std::to_string(need) + " bytes, have " +
                                 std::to_string(data.size() - parser.position()));
  }
  const uint8_t* p = data.data() + parser.position();
  ImagePlane img(width, height);
  for (size_t i = 0; i < img.size(); ++i) {
    img.samples[i] = rgb ? Bt709Luma(p[3 * i], p[3 * i + 1], p[3 * i + 2])
                         : p[i] / 255.0;
  }
  return img;
}

ImagePlane LoadImage(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  try {
    return DecodePnm(bytes);
  } catch (const Error& e) {
    Fail(e.kind(), path + ": " + e.what());
  }
}

std::vector<uint8_t> EncodePgm(const ImagePlane& img) {
  return EncodePnm(img, false);
}
std::vector<uint8_t> EncodePpm(const ImagePlane& img) {
  return EncodePnm(img, true);
}
void SavePgm(const ImagePlane& img, const std::string& path) {
  WriteFileAtomic(path, EncodePgm(img));
}
void SavePpm(const ImagePlane& img, const std::string& path) {
  WriteFileAtomic(path, EncodePpm(img));
}

std::vector<std::string> ListImageFiles(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    Fail(ErrorKind::kIo, "not a directory: " + dir);
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<ImagePlane> LoadImageDir(const std::string& dir) {
  std::vector<ImagePlane> images;
  for (const auto& f : ListImageFiles(dir)) images.push_back(LoadImage(f));
  return images;
}

ImagePlane CropBorder(const ImagePlane& img, int margin) {
  if (margin < 0 || 2 * margin >= std::min(img.width, img.height)) {
    Fail(ErrorKind::kArgument, "crop margin " + std::to_string(margin) +
                                   " too large for " + std::to_string(img.width) +
                                   "x" + std::to_string(img.height));
  }
  ImagePlane out(img.width - 2 * margin, img.height - 2 * margin);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = img.at(x + margin, y + margin);
    }
  }
  return out;
}

PatchBatch SamplePatches(std::span<const ImagePlane> corpus, int count,
                         int side, Rng& rng) {
  if (count < 1 || side < 1) {
    Fail(ErrorKind::kArgument, "patch count and side must be positive");
  }
  std::vector<const ImagePlane*> usable;
  for (const auto& img : corpus) {
    if (img.width >= side && img.height >= side) usable.push_back(&img);
  }
  if (usable.empty()) {
    Fail(ErrorKind::kArgument, "no corpus image is at least " +
                                   std::to_string(side) + "x" +
                                   std::to_string(side));
  }
  PatchBatch batch;
  batch.side = side;
  batch.patches.reserve(count);
  for (int n = 0; n < count; ++n) {
    const ImagePlane& src = *usable[rng.UniformInt(usable.size())];
    const int ox = static_cast<int>(rng.UniformInt(src.width - side + 1));
    const int oy = static_cast<int>(rng.UniformInt(src.height - side + 1));
    ImagePlane patch(side, side);
    for (int y = 0; y < side; ++y) {
      std::copy_n(&src.samples[static_cast<size_t>(oy + y) * src.width + ox],
                  side, &patch.samples[static_cast<size_t>(y) * side]);
    }
    batch.patches.push_back(std::move(patch));
  }
  return batch;
}

BlockLayout MakeBlockLayout(int width, int height, int block_side) {
  if (block_side < 1 || width < 1 || height < 1) {
    Fail(ErrorKind::kArgument, "block layout needs positive dimensions");
  }
  BlockLayout layout;
  layout.block_side = block_side;
  layout.width = width;
  layout.height = height;
  layout.blocks_x = (width + block_side - 1) / block_side;
  layout.blocks_y = (height + block_side - 1) / block_side;
  return layout;
}

Matrix BlockifyArray(const PlaneArray& img, const BlockLayout& layout) {
  if (img.rows() != layout.height || img.cols() != layout.width) {
    Fail(ErrorKind::kStructural, "image does not match block layout");
  }
  const int b = layout.block_side;
  Matrix blocks(layout.coefficients(), layout.block_count());
  for (int by = 0; by < layout.blocks_y; ++by) {
    for (int bx = 0; bx < layout.blocks_x; ++bx) {
      const int col = by * layout.blocks_x + bx;
      for (int r = 0; r < b; ++r) {
        const int y = std::min(by * b + r, layout.height - 1);
        for (int c = 0; c < b; ++c) {
          const int x = std::min(bx * b + c, layout.width - 1);
          blocks(r * b + c, col) = img(y, x);
        }
      }
    }
  }
  return blocks;
}

PlaneArray UnblockifyArray(const Matrix& blocks, const BlockLayout& layout) {
  const int b = layout.block_side;
  if (b < 1 || blocks.rows() != layout.coefficients() ||
      blocks.cols() != layout.block_count() ||
      layout.blocks_x != (layout.width + b - 1) / b ||
      layout.blocks_y != (layout.height + b - 1) / b) {
    Fail(ErrorKind::kStructural, "block matrix inconsistent with its layout");
  }
  PlaneArray img(layout.height, layout.width);
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const int col = (y / b) * layout.blocks_x + x / b;
      img(y, x) = blocks((y % b) * b + x % b, col);
    }
  }
  return img;
}

BlockSet Blockify(const ImagePlane& img, int block_side) {
  BlockSet set;
  set.layout = MakeBlockLayout(img.width, img.height, block_side);
  set.blocks = BlockifyArray(ToArray(img), set.layout);
  return set;
}

ImagePlane Unblockify(const BlockSet& blocks) {
  return FromArray(UnblockifyArray(blocks.blocks, blocks.layout));
}

}  // namespace ntc
