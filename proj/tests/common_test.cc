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

#include "ntc/common.h"

#include <cmath>
#include <limits>
#include <set>

#include "gtest/gtest.h"

namespace ntc {
namespace {

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t x = a.Next();
    EXPECT_EQ(x, b.Next());
    differs |= x != c.Next();
  }
  EXPECT_TRUE(differs);
}

TEST(RngTest, UniformRanges) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double o = rng.UniformOpen();
    ASSERT_GT(o, 0.0);
    ASSERT_LT(o, 1.0);
    ASSERT_LT(rng.UniformInt(7), 7u);
  }
}

TEST(RngTest, NormalMoments) {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.Normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}

TEST(RngTest, UniformIntCoversRange) {
  Rng rng(9);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.UniformInt(5));
  EXPECT_EQ(seen.size(), 5u);
}

TEST(ByteIoTest, RoundTrip) {
  ByteWriter w;
  w.U8(7);
  w.U16(0xBEEF);
  w.U32(0xDEADBEEF);
  w.U64(0x0123456789ABCDEFull);
  w.F64(-2.5);
  w.Text("hello");
  const std::vector<double> block = {1.0, -0.0, 3.25};
  w.F64Block(block);
  const std::vector<uint8_t> bytes = w.bytes();
  EXPECT_EQ(bytes[1], 0xEF);  // little-endian
  ByteReader r(bytes);
  EXPECT_EQ(r.U8(), 7);
  EXPECT_EQ(r.U16(), 0xBEEF);
  EXPECT_EQ(r.U32(), 0xDEADBEEFu);
  EXPECT_EQ(r.U64(), 0x0123456789ABCDEFull);
  EXPECT_EQ(r.F64(), -2.5);
  EXPECT_EQ(r.Text(), "hello");
  EXPECT_EQ(r.F64Block(), block);
  EXPECT_EQ(r.remaining(), 0u);
}

TEST(ByteIoTest, TruncationIsCorrupt) {
  ByteWriter w;
  w.U32(5);
  ByteReader r(w.bytes());
  try {
    r.U64();
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCorrupt);
  }
}

TEST(ByteIoTest, OversizedBlockIsCorrupt) {
  ByteWriter w;
  w.U64(1000);
  w.F64(1.0);
  ByteReader r(w.bytes());
  EXPECT_THROW(r.F64Block(), Error);
}

TEST(Fnv1aTest, KnownVectors) {
  // Reference values of the 64-bit FNV-1a hash.
  EXPECT_EQ(Fnv1a64({}), 0xcbf29ce484222325ull);
  const uint8_t a[] = {'a'};
  EXPECT_EQ(Fnv1a64(a), 0xaf63dc4c8601ec8cull);
  const uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  EXPECT_EQ(Fnv1a64(foobar), 0x85944171f73967e8ull);
}

TEST(FormatDoubleTest, RoundTrips) {
  for (double v : {0.0, 1.0, -1.5, 0.1, 1e-300, 123456789.125,
                   std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()}) {
    EXPECT_EQ(ParseDouble(FormatDouble(v)), v) << FormatDouble(v);
  }
  EXPECT_TRUE(std::isnan(ParseDouble(FormatDouble(std::nan("")))));
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_THROW(ParseDouble("1.5x"), Error);
  EXPECT_THROW(ParseDouble(""), Error);
}

}  // namespace
}  // namespace ntc
