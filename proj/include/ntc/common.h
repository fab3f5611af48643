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

#ifndef NTC_COMMON_H_
#define NTC_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ntc {

// Column-major dense types. Block matrices hold one block per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexMatrix = Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorKind {
  kArgument,    // caller violated a precondition
  kDecode,      // malformed image or stream payload
  kStructural,  // inconsistent metadata or shapes
  kNumeric,     // non-finite intermediate value
  kVersion,     // unsupported file version
  kCorrupt,     // truncated or checksum-failing file
  kDigest,      // bitstream does not belong to the given model
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& what);

// Deterministic generator. Conversions to floating point are done here
// instead of via <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t Next();
  // [0, 1) with 53 random bits.
  double Uniform();
  // (0, 1), never an endpoint.
  double UniformOpen();
  // [0, n), unbiased.
  uint64_t UniformInt(uint64_t n);
  double Normal();

 private:
  uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Little-endian byte serialization shared by the file formats.
class ByteWriter {
 public:
  void U8(uint8_t v) { bytes_.push_back(v); }
  void U16(uint16_t v);
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F64(double v);
  void Bytes(std::span<const uint8_t> data);
  void Text(std::string_view s);  // u64 length prefix
  void F64Block(std::span<const double> values);  // u64 count prefix

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> Release() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

// Reads fail with ErrorKind::kCorrupt on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}
  uint8_t U8();
  uint16_t U16();
  uint32_t U32();
  uint64_t U64();
  double F64();
  std::span<const uint8_t> Bytes(size_t n);
  std::string Text();
  std::vector<double> F64Block();

  size_t position() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void Need(size_t n) const;
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

uint64_t Fnv1a64(std::span<const uint8_t> data);

std::vector<uint8_t> ReadFileBytes(const std::string& path);
// Writes to a sibling temp file, then renames over `path`.
void WriteFileAtomic(const std::string& path, std::span<const uint8_t> data);

// Shortest round-trip decimal representation ("inf", "-inf", "nan" for
// non-finite values).
std::string FormatDouble(double v);
double ParseDouble(std::string_view s);

}  // namespace ntc

#endif  // NTC_COMMON_H_
