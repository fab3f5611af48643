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

#include "ntc/codec.h"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ntc {

namespace {

constexpr char kBitstreamMagic[4] = {'N', 'T', 'C', 'B'};
constexpr uint32_t kTop = 1u << 24;

// Carry-propagating range encoder in the style of LZMA: 64-bit low, 32-bit
// range, one cached byte plus a count of pending 0xFF bytes.
class RangeEncoder {
 public:
  void Encode(uint32_t start, uint32_t size) {
    range_ >>= kFrequencyBits;
    low_ += static_cast<uint64_t>(start) * range_;
    range_ *= size;
    while (range_ < kTop) {
      range_ <<= 8;
      ShiftLow();
    }
  }

  std::vector<uint8_t> Finish() {
    for (int i = 0; i < 5; ++i) ShiftLow();
    return std::move(out_);
  }

 private:
  void ShiftLow() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<uint8_t>(low_ >> 32);
      uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> in) : in_(in) {
    if (NextByte() != 0) Fail(ErrorKind::kDecode, "range decoder: bad lead byte");
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | NextByte();
  }

  uint32_t DecodeFreq() {
    range_ >>= kFrequencyBits;
    const uint32_t v = code_ / range_;
    if (v >= kFrequencyTotal) Fail(ErrorKind::kDecode, "range decoder: corrupt payload");
    return v;
  }

  void Consume(uint32_t start, uint32_t size) {
    code_ -= start * range_;
    range_ *= size;
    while (range_ < kTop) {
      code_ = (code_ << 8) | NextByte();
      range_ <<= 8;
    }
  }

  size_t remaining() const { return in_.size() - pos_; }

 private:
  uint8_t NextByte() {
    if (pos_ >= in_.size()) {
      Fail(ErrorKind::kDecode, "range decoder: payload exhausted");
    }
    return in_[pos_++];
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

const ChannelTable& TableFor(const FrozenTables& tables, size_t i) {
  return tables.channels[i % tables.channels.size()];
}

void CheckTables(const FrozenTables& tables) {
  if (tables.channels.empty()) Fail(ErrorKind::kArgument, "no frequency tables");
}

}  // namespace

int32_t ChannelTable::Clamp(int32_t s) const { return std::clamp(s, first, last()); }

ChannelTable QuantizePmf(const IntegerPmf& pmf) {
  const size_t n = pmf.probs.size();
  if (n == 0) Fail(ErrorKind::kArgument, "cannot freeze an empty support");
  if (n > kFrequencyTotal) Fail(ErrorKind::kArgument, "support exceeds table precision");
  if (pmf.first < INT32_MIN || pmf.last() > INT32_MAX) {
    Fail(ErrorKind::kArgument, "support outside int32 range");
  }
  ChannelTable t;
  t.first = static_cast<int32_t>(pmf.first);
  t.freq.resize(n);
  int64_t total = 0;
  for (size_t i = 0; i < n; ++i) {
    t.freq[i] = static_cast<uint32_t>(
        std::max<int64_t>(1, std::llround(pmf.probs[i] * kFrequencyTotal)));
    total += t.freq[i];
  }
  int64_t diff = static_cast<int64_t>(kFrequencyTotal) - total;
  // Settle the rounding error on the most probable symbols, which keeps the
  // relative change in their code length smallest.
  while (diff != 0) {
    const auto it = std::max_element(t.freq.begin(), t.freq.end());
    if (diff > 0) {
      *it += static_cast<uint32_t>(diff);
      diff = 0;
    } else {
      const int64_t take = std::min<int64_t>(-diff, static_cast<int64_t>(*it) - 1);
      if (take == 0) Fail(ErrorKind::kArgument, "cannot normalize frequency table");
      *it -= static_cast<uint32_t>(take);
      diff += take;
    }
  }
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + t.freq[i];
  return t;
}

FrozenTables FreezeTables(const DensityModel& density) {
  FrozenTables tables;
  tables.channels.reserve(density.channels());
  for (int c = 0; c < density.channels(); ++c) {
    tables.channels.push_back(QuantizePmf(PmfAtIntegers(density, c)));
  }
  return tables;
}

FrozenTables FreezeTables(const Checkpoint& ckpt) { return FreezeTables(ckpt.density); }

std::vector<uint8_t> RangeEncode(std::span<const int32_t> symbols,
                                 const FrozenTables& tables) {
  CheckTables(tables);
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const ChannelTable& t = TableFor(tables, i);
    const int32_t s = symbols[i];
    if (s < t.first || s > t.last()) {
      Fail(ErrorKind::kArgument, "symbol " + std::to_string(s) +
                                     " outside table range at position " +
                                     std::to_string(i));
    }
    const size_t k = static_cast<size_t>(s - t.first);
    enc.Encode(t.cum[k], t.freq[k]);
  }
  return enc.Finish();
}

std::vector<int32_t> RangeDecode(std::span<const uint8_t> payload, size_t count,
                                 const FrozenTables& tables) {
  CheckTables(tables);
  RangeDecoder dec(payload);
  std::vector<int32_t> out(count);
  for (size_t i = 0; i < count; ++i) {
    const ChannelTable& t = TableFor(tables, i);
    const uint32_t v = dec.DecodeFreq();
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), v);
    const size_t k = static_cast<size_t>(it - t.cum.begin()) - 1;
    if (k >= t.freq.size()) Fail(ErrorKind::kDecode, "range decoder: corrupt payload");
    dec.Consume(t.cum[k], t.freq[k]);
    out[i] = t.first + static_cast<int32_t>(k);
  }
  if (dec.remaining() != 0) {
    Fail(ErrorKind::kDecode, "range decoder: " + std::to_string(dec.remaining()) +
                                 " unused payload bytes");
  }
  return out;
}

double TableCostBits(std::span<const int32_t> symbols, const FrozenTables& tables) {
  CheckTables(tables);
  double bits = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const ChannelTable& t = TableFor(tables, i);
    const uint32_t f = t.freq[static_cast<size_t>(t.Clamp(symbols[i]) - t.first)];
    bits += kFrequencyBits - std::log2(static_cast<double>(f));
  }
  return bits;
}

std::vector<uint8_t> Bitstream::Serialize() const {
  ByteWriter w;
  w.Bytes({reinterpret_cast<const uint8_t*>(kBitstreamMagic), 4});
  w.U16(kVersion);
  w.U64(model_digest);
  w.U16(lambda_index);
  w.U32(width);
  w.U32(height);
  w.U32(static_cast<uint32_t>(payload.size()));
  w.Bytes(payload);
  return w.Release();
}

Bitstream Bitstream::Parse(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.Bytes(4);
  if (std::memcmp(magic.data(), kBitstreamMagic, 4) != 0) {
    Fail(ErrorKind::kDecode, "not a bitstream (bad magic)");
  }
  const uint16_t version = r.U16();
  if (version != kVersion) {
    Fail(ErrorKind::kVersion, "unsupported bitstream version " + std::to_string(version));
  }
  Bitstream bs;
  bs.model_digest = r.U64();
  bs.lambda_index = r.U16();
  bs.width = r.U32();
  bs.height = r.U32();
  const uint32_t n = r.U32();
  const auto payload = r.Bytes(n);
  bs.payload.assign(payload.begin(), payload.end());
  if (r.remaining() != 0) Fail(ErrorKind::kDecode, "bitstream: trailing bytes");
  if (bs.width == 0 || bs.height == 0 || bs.width > (1u << 20) ||
      bs.height > (1u << 20)) {
    Fail(ErrorKind::kDecode, "bitstream: invalid image dimensions");
  }
  return bs;
}

Codec::Codec(Checkpoint ckpt)
    : ckpt_(std::move(ckpt)),
      tables_(FreezeTables(ckpt_)),
      digest_(CheckpointDigest(ckpt_)) {}

IndexMatrix Codec::Quantize(const ImagePlane& img) const {
  const BlockSet blocks = Blockify(img, ckpt_.params.block_side);
  const Matrix y = GdnAnalyze(blocks.blocks, ckpt_.params.analysis).output;
  IndexMatrix q = QuantizeUniform(y).indices;
  for (Eigen::Index n = 0; n < q.cols(); ++n) {
    for (Eigen::Index c = 0; c < q.rows(); ++c) q(c, n) = tables_.channels[c].Clamp(q(c, n));
  }
  return q;
}

ImagePlane Codec::Reconstruct(const IndexMatrix& q, int width, int height) const {
  const BlockLayout layout = MakeBlockLayout(width, height, ckpt_.params.block_side);
  if (q.rows() != layout.coefficients() || q.cols() != layout.block_count()) {
    Fail(ErrorKind::kStructural, "index matrix does not match image layout");
  }
  const Matrix xhat = GdnSynthesize(q.cast<double>(), ckpt_.params.synthesis).output;
  return ClampToUnit(UnblockifyArray(xhat, layout));
}

Bitstream Codec::Compress(const ImagePlane& img) const {
  const IndexMatrix q = Quantize(img);
  Bitstream bs;
  bs.model_digest = digest_;
  bs.lambda_index = static_cast<uint16_t>(ckpt_.config.lambda_index);
  bs.width = static_cast<uint32_t>(img.width);
  bs.height = static_cast<uint32_t>(img.height);
  bs.payload = RangeEncode({q.data(), static_cast<size_t>(q.size())}, tables_);
  return bs;
}

ImagePlane Codec::Decompress(const Bitstream& bs, IndexMatrix* indices) const {
  if (bs.model_digest != digest_) {
    Fail(ErrorKind::kDigest, "bitstream was produced with a different model");
  }
  const BlockLayout layout = MakeBlockLayout(static_cast<int>(bs.width),
                                             static_cast<int>(bs.height),
                                             ckpt_.params.block_side);
  const size_t count =
      static_cast<size_t>(layout.coefficients()) * layout.block_count();
  const std::vector<int32_t> symbols = RangeDecode(bs.payload, count, tables_);
  IndexMatrix q = Eigen::Map<const IndexMatrix>(symbols.data(), layout.coefficients(),
                                                layout.block_count());
  ImagePlane img = Reconstruct(q, layout.width, layout.height);
  if (indices) *indices = std::move(q);
  return img;
}

Bitstream CompressImage(const ImagePlane& img, const Checkpoint& ckpt) {
  return Codec(ckpt).Compress(img);
}

ImagePlane DecompressImage(const Bitstream& bs, const Checkpoint& ckpt) {
  return Codec(ckpt).Decompress(bs);
}

}  // namespace ntc
