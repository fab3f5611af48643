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

// Scalar quantizers, the additive uniform noise relaxation, the per-channel
// piecewise-linear density of the noisy code, and entropy estimates.

#ifndef NTC_ENTROPY_H_
#define NTC_ENTROPY_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ntc/common.h"

namespace ntc {

struct UniformQuantized {
  IndexMatrix indices;
  Matrix reconstruction;  // equal to indices (bin size 1)
};

// Round half away from zero.
UniformQuantized QuantizeUniform(const Matrix& y);

struct DeadzoneQuantizer {
  double step = 1.0;
  // Zero-bin width in units of `step`; 1 gives the plain uniform quantizer.
  double zone_ratio = 1.0;
  // Reconstruction point |q| + offset (in steps) for q != 0. Negative means
  // the default 0.25 * (zone_ratio - 1), which is 0.25 at zone_ratio 2 and
  // 0 for the uniform case.
  double reconstruction_offset = -1.0;

  double offset() const;
};

struct DeadzoneQuantized {
  IndexMatrix indices;
  Matrix reconstruction;
};

// q = sign(v) * max(0, floor(|v|/step + 1 - zone_ratio/2)).
DeadzoneQuantized QuantizeDeadzone(const Matrix& v, const DeadzoneQuantizer& q);

struct NoisySample {
  Matrix noisy;  // y + noise
  Matrix noise;  // iid uniform on (-1/2, 1/2)
};

Matrix UniformNoise(Eigen::Index rows, Eigen::Index cols, Rng& rng);
NoisySample Perturb(const Matrix& y, Rng& rng);

struct DensityValue {
  double density;
  double slope;
};

struct IntegerPmf {
  int64_t first = 0;  // integer of probs[0]
  std::vector<double> probs;

  int64_t last() const { return first + static_cast<int64_t>(probs.size()) - 1; }
};

// Piecewise-linear density per channel on a uniform knot lattice. Knot k of
// a channel sits at (first_index + k) * spacing. The trapezoidal integral of
// every channel is 1 and no knot value is below `floor`.
class DensityModel {
 public:
  struct Channel {
    int64_t first_index = 0;
    std::vector<double> values;

    size_t count() const { return values.size(); }
  };

  static constexpr double kDefaultSpacing = 0.1;
  static constexpr double kDefaultFloor = 1e-9;
  static constexpr double kMargin = 1.5;
  static constexpr size_t kMaxKnots = 1 << 16;

  DensityModel() = default;
  // Flat density on [-1.5, 1.5] for every channel.
  explicit DensityModel(int channels, double spacing = kDefaultSpacing,
                        double floor = kDefaultFloor);

  int channels() const { return static_cast<int>(channels_.size()); }
  double spacing() const { return spacing_; }
  double floor() const { return floor_; }
  const Channel& channel(int c) const { return channels_[c]; }
  double KnotPosition(int c, size_t k) const;
  double LowerBound(int c) const { return KnotPosition(c, 0); }
  double UpperBound(int c) const {
    return KnotPosition(c, channels_[c].count() - 1);
  }

  // Blends a linearly binned histogram of `samples` (one row per channel)
  // into the current values: new = (1 - rate) * old + rate * histogram, then
  // renormalizes. The lattice widens to cover [min - 1.5, max + 1.5] of the
  // samples, up to kMaxKnots knots; samples still outside are ignored.
  void Update(const Matrix& samples, double rate);

  DensityValue Eval(int c, double t) const;
  double Integral(int c) const;
  // -integral p log2 p, exact for the piecewise-linear density.
  double DifferentialEntropyBits(int c) const;

  // Rebuilds a model from raw parts (deserialization). Validates and
  // renormalizes nothing; throws kCorrupt on inconsistent parts.
  static DensityModel FromParts(double spacing, double floor,
                                std::vector<Channel> channels);

  bool operator==(const DensityModel&) const;

 private:
  void Widen(Channel* ch, int64_t lo_index, int64_t hi_index);
  void Normalize(Channel* ch) const;

  double spacing_ = kDefaultSpacing;
  double floor_ = kDefaultFloor;
  std::vector<Channel> channels_;
};

struct RateProxy {
  double bits;
  Matrix gradient;  // d bits / d noisy
};

// Sum over all entries of -log2 p_c(noisy(c, n)) with its gradient.
RateProxy RateProxyBits(const DensityModel& model, const Matrix& noisy);

// Density values at the integers of the channel's lattice range,
// renormalized to sum to one.
IntegerPmf PmfAtIntegers(const DensityModel& model, int c);

double EntropyBits(std::span<const double> pmf);

// Pools per-channel symbol counts over any number of index matrices (one
// row per channel) and reports the empirical discrete entropy.
class EntropyAccumulator {
 public:
  explicit EntropyAccumulator(int channels) : counts_(channels) {}
  void Add(const IndexMatrix& q);
  // Sum of channel entropies divided by the channel count: bits per pixel
  // when channels are the pixels of a block.
  double BitsPerPixel() const;
  double ChannelBits(int c) const;
  int64_t samples() const { return samples_; }

 private:
  std::vector<std::map<int32_t, int64_t>> counts_;
  int64_t samples_ = 0;
};

double DiscreteEntropy(const IndexMatrix& q);

}  // namespace ntc

#endif  // NTC_ENTROPY_H_
