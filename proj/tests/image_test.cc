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

#include <filesystem>
#include <string>

#include "gtest/gtest.h"
#include "ntc/synthetic.h"
#include "test_util.h"

namespace ntc {
namespace {

using testing::RandomImage;

std::vector<uint8_t> Bytes(const std::string& s) { return {s.begin(), s.end()}; }

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(DecodePnmTest, ZeroGrayImage) {
  std::string data = "P5\n4 4\n255\n";
  data.append(16, '\0');
  const ImagePlane img = DecodePnm(Bytes(data));
  EXPECT_EQ(img.width, 4);
  EXPECT_EQ(img.height, 4);
  for (double s : img.samples) EXPECT_EQ(s, 0.0);
}

TEST(DecodePnmTest, FullScaleIsOne) {
  std::string data = "P5 2 1 255\n";
  data += static_cast<char>(255);
  data += static_cast<char>(51);
  const ImagePlane img = DecodePnm(Bytes(data));
  EXPECT_EQ(img.samples[0], 1.0);
  EXPECT_EQ(img.samples[1], 51.0 / 255.0);
}

TEST(DecodePnmTest, RgbUsesBt709Luma) {
  std::string data = "P6\n# a comment\n1 1\n255\n";
  data += static_cast<char>(30);
  data += static_cast<char>(60);
  data += static_cast<char>(90);
  const ImagePlane img = DecodePnm(Bytes(data));
  const double expected = 0.2126 * 30 / 255 + 0.7152 * 60 / 255 + 0.0722 * 90 / 255;
  EXPECT_NEAR(img.samples[0], expected, 1e-15);
  // 55.788 / 255.
  EXPECT_NEAR(img.samples[0], 0.218776, 1e-6);
}

TEST(DecodePnmTest, MalformedInputsAreDecodeErrors) {
  std::string truncated = "P5\n4 4\n255\n";
  truncated.append(15, '\0');
  EXPECT_EQ(KindOf([&] { DecodePnm(Bytes(truncated)); }), ErrorKind::kDecode);
  EXPECT_EQ(KindOf([&] { DecodePnm(Bytes("P2\n1 1\n255\n0")); }), ErrorKind::kDecode);
  std::string deep = "P5\n1 1\n65535\n";
  deep.append(2, '\0');
  EXPECT_EQ(KindOf([&] { DecodePnm(Bytes(deep)); }), ErrorKind::kDecode);
  EXPECT_EQ(KindOf([&] { DecodePnm(Bytes("P5\n0 1\n255\n")); }), ErrorKind::kDecode);
  EXPECT_EQ(KindOf([&] { DecodePnm(Bytes("P5\n1")); }), ErrorKind::kDecode);
}

TEST(PgmTest, EncodeDecodeIsByteIdentical) {
  Rng rng(3);
  std::string data = "P5\n7 5\n255\n";
  for (int i = 0; i < 35; ++i) data += static_cast<char>(rng.UniformInt(256));
  const std::vector<uint8_t> bytes = Bytes(data);
  EXPECT_EQ(EncodePgm(DecodePnm(bytes)), bytes);
}

TEST(PgmTest, FileRoundTrip) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ntc_image_test.pgm").string();
  Rng rng(4);
  const ImagePlane img = GenerateDeadLeaves(DeadLeavesConfig{.width = 40, .height = 30}, rng);
  SavePgm(img, path);
  EXPECT_EQ(LoadImage(path), img);
  std::filesystem::remove(path);
}

TEST(CropBorderTest, KodakGeometry) {
  const ImagePlane img(768, 512, 0.5);
  const ImagePlane c = CropBorder(img, 8);
  EXPECT_EQ(c.width, 752);
  EXPECT_EQ(c.height, 496);
}

TEST(CropBorderTest, ZeroMarginIsIdentity) {
  Rng rng(1);
  const ImagePlane img = RandomImage(9, 11, rng);
  EXPECT_EQ(CropBorder(img, 0), img);
}

TEST(CropBorderTest, InteriorPreserved) {
  const ImagePlane img(20, 20, 0.25);
  const ImagePlane c = CropBorder(img, 5);
  EXPECT_EQ(c, ImagePlane(10, 10, 0.25));
  Rng rng(2);
  const ImagePlane r = RandomImage(12, 9, rng);
  const ImagePlane rc = CropBorder(r, 2);
  for (int y = 0; y < rc.height; ++y) {
    for (int x = 0; x < rc.width; ++x) EXPECT_EQ(rc.at(x, y), r.at(x + 2, y + 2));
  }
}

TEST(CropBorderTest, TooLargeMarginIsArgumentError) {
  const ImagePlane img(20, 30, 0.0);
  EXPECT_EQ(KindOf([&] { CropBorder(img, 10); }), ErrorKind::kArgument);
}

TEST(SamplePatchesTest, ShapeAndDeterminism) {
  Rng corpus_rng(1);
  const std::vector<ImagePlane> corpus = {RandomImage(200, 150, corpus_rng),
                                          RandomImage(130, 140, corpus_rng)};
  Rng a(7), b(7);
  const PatchBatch pa = SamplePatches(corpus, 4, 128, a);
  const PatchBatch pb = SamplePatches(corpus, 4, 128, b);
  EXPECT_EQ(pa.count(), 4);
  EXPECT_EQ(pa.side, 128);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(pa.patches[i].width, 128);
    EXPECT_EQ(pa.patches[i], pb.patches[i]);
  }
}

TEST(SamplePatchesTest, ExactSizeImageForcesOffset) {
  Rng rng(1);
  const std::vector<ImagePlane> corpus = {RandomImage(128, 128, rng)};
  const PatchBatch batch = SamplePatches(corpus, 3, 128, rng);
  for (const ImagePlane& p : batch.patches) EXPECT_EQ(p, corpus[0]);
}

TEST(SamplePatchesTest, SmallImagesSkipped) {
  Rng rng(1);
  const std::vector<ImagePlane> corpus = {RandomImage(16, 16, rng),
                                          RandomImage(32, 32, rng)};
  const PatchBatch batch = SamplePatches(corpus, 5, 32, rng);
  for (const ImagePlane& p : batch.patches) EXPECT_EQ(p, corpus[1]);
  const std::vector<ImagePlane> tiny = {RandomImage(16, 16, rng)};
  EXPECT_EQ(KindOf([&] { SamplePatches(tiny, 1, 32, rng); }), ErrorKind::kArgument);
}

TEST(BlockifyTest, ExactTiling) {
  Rng rng(1);
  const BlockSet set = Blockify(RandomImage(32, 32, rng), 16);
  EXPECT_EQ(set.blocks.rows(), 256);
  EXPECT_EQ(set.blocks.cols(), 4);
}

TEST(BlockifyTest, LayoutIsRowMajorRaster) {
  ImagePlane img(4, 4);
  for (int i = 0; i < 16; ++i) img.samples[i] = i / 255.0;
  const BlockSet set = Blockify(img, 2);
  // Block 1 is the top-right 2x2 block: pixels 2, 3, 6, 7.
  EXPECT_EQ(set.blocks(0, 1), 2 / 255.0);
  EXPECT_EQ(set.blocks(1, 1), 3 / 255.0);
  EXPECT_EQ(set.blocks(2, 1), 6 / 255.0);
  EXPECT_EQ(set.blocks(3, 1), 7 / 255.0);
  EXPECT_EQ(set.blocks(0, 2), 8 / 255.0);
}

TEST(BlockifyTest, EdgeReplicatePadding) {
  Rng rng(1);
  const ImagePlane img = RandomImage(16, 17, rng);
  const BlockSet set = Blockify(img, 16);
  ASSERT_EQ(set.blocks.cols(), 2);
  // The second block row holds image row 16 replicated 16 times.
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) EXPECT_EQ(set.blocks(r * 16 + c, 1), img.at(c, 16));
  }
  const BlockSet wide = Blockify(RandomImage(17, 16, rng), 16);
  EXPECT_EQ(wide.blocks.cols(), 2);
}

TEST(BlockifyTest, RoundTripIsExact) {
  Rng rng(8);
  const ImagePlane big = RandomImage(752, 496, rng);
  EXPECT_EQ(Unblockify(Blockify(big, 16)), big);
  for (int b : {4, 8, 16}) {
    const ImagePlane img = RandomImage(37, 23, rng);
    EXPECT_EQ(Unblockify(Blockify(img, b)), img);
  }
}

TEST(BlockifyTest, InconsistentMetadataIsStructural) {
  Rng rng(1);
  BlockSet set = Blockify(RandomImage(32, 32, rng), 16);
  set.layout.blocks_x = 3;
  EXPECT_EQ(KindOf([&] { Unblockify(set); }), ErrorKind::kStructural);
}

TEST(DeadLeavesTest, DeterministicAndValid) {
  const auto a = GenerateCorpus(3, DeadLeavesConfig{.width = 64, .height = 48}, 11);
  const auto b = GenerateCorpus(3, DeadLeavesConfig{.width = 64, .height = 48}, 11);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  for (const ImagePlane& img : a) {
    ValidateImage(img);
    EXPECT_EQ(img.width, 64);
    // Samples sit on the 8-bit grid.
    for (double s : img.samples) EXPECT_EQ(std::round(s * 255.0) / 255.0, s);
  }
  EXPECT_NE(a[0], a[1]);
}

}  // namespace
}  // namespace ntc
