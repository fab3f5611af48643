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

// Static range coding of quantization indices and the bitstream container.

#ifndef NTC_CODEC_H_
#define NTC_CODEC_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ntc/common.h"
#include "ntc/entropy.h"
#include "ntc/image.h"
#include "ntc/training.h"

namespace ntc {

constexpr int kFrequencyBits = 16;
constexpr uint32_t kFrequencyTotal = 1u << kFrequencyBits;

// Integer frequencies of one channel over [first, last]; every symbol has
// frequency >= 1 and the frequencies sum to kFrequencyTotal.
struct ChannelTable {
  int32_t first = 0;
  std::vector<uint32_t> freq;
  std::vector<uint32_t> cum;  // freq.size() + 1 entries, cum[0] = 0

  int32_t last() const { return first + static_cast<int32_t>(freq.size()) - 1; }
  int32_t Clamp(int32_t s) const;
};

struct FrozenTables {
  std::vector<ChannelTable> channels;
};

// Quantizes a probability vector to frequencies summing to 2^16, each >= 1.
ChannelTable QuantizePmf(const IntegerPmf& pmf);
FrozenTables FreezeTables(const DensityModel& density);
FrozenTables FreezeTables(const Checkpoint& ckpt);

// Symbol i is coded with table i % channels. Symbols must lie inside their
// table's range.
std::vector<uint8_t> RangeEncode(std::span<const int32_t> symbols,
                                 const FrozenTables& tables);
// Throws kDecode if the payload is exhausted or inconsistent before `count`
// symbols have been decoded.
std::vector<int32_t> RangeDecode(std::span<const uint8_t> payload, size_t count,
                                 const FrozenTables& tables);

// Ideal code length in bits of `symbols` under `tables`.
double TableCostBits(std::span<const int32_t> symbols, const FrozenTables& tables);

// Layout (little-endian): "NTCB", u16 version, u64 checkpoint digest, u16
// lambda index, u32 width, u32 height, u32 payload length, payload.
struct Bitstream {
  static constexpr uint16_t kVersion = 1;
  static constexpr size_t kHeaderBytes = 4 + 2 + 8 + 2 + 4 + 4 + 4;

  uint64_t model_digest = 0;
  uint16_t lambda_index = 0;
  uint32_t width = 0;
  uint32_t height = 0;
  std::vector<uint8_t> payload;

  std::vector<uint8_t> Serialize() const;
  static Bitstream Parse(std::span<const uint8_t> bytes);
  size_t size() const { return kHeaderBytes + payload.size(); }
  bool operator==(const Bitstream&) const = default;
};

// Encoder/decoder bound to one checkpoint; holds the frozen tables and the
// checkpoint digest.
class Codec {
 public:
  explicit Codec(Checkpoint ckpt);

  // Hard-quantized indices, clamped to the table ranges; one block per
  // column.
  IndexMatrix Quantize(const ImagePlane& img) const;
  ImagePlane Reconstruct(const IndexMatrix& q, int width, int height) const;

  Bitstream Compress(const ImagePlane& img) const;
  // Also returns the decoded indices.
  ImagePlane Decompress(const Bitstream& bs, IndexMatrix* indices = nullptr) const;

  const Checkpoint& checkpoint() const { return ckpt_; }
  const FrozenTables& tables() const { return tables_; }
  uint64_t digest() const { return digest_; }

 private:
  Checkpoint ckpt_;
  FrozenTables tables_;
  uint64_t digest_;
};

Bitstream CompressImage(const ImagePlane& img, const Checkpoint& ckpt);
ImagePlane DecompressImage(const Bitstream& bs, const Checkpoint& ckpt);

}  // namespace ntc

#endif  // NTC_CODEC_H_
