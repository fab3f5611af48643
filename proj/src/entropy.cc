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

#include "ntc/entropy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ntc {

namespace {

// Solves M w = v in place for the Gram matrix of the hat functions on a
// uniform lattice (in units of the spacing): 2/3 on the diagonal, 1/6 off
// it, 1/3 at the two ends. This turns linearly binned sample weights into
// the least-squares piecewise-linear density, which is exact for densities
// that are themselves piecewise linear on the lattice.
void SolveHatGram(std::vector<double>* v) {
  const size_t n = v->size();
  std::vector<double> c(n);
  auto& d = *v;
  auto diag = [n](size_t k) { return k == 0 || k + 1 == n ? 1.0 / 3.0 : 2.0 / 3.0; };
  constexpr double kOff = 1.0 / 6.0;
  double denom = diag(0);
  c[0] = kOff / denom;
  d[0] /= denom;
  for (size_t k = 1; k < n; ++k) {
    denom = diag(k) - kOff * c[k - 1];
    c[k] = kOff / denom;
    d[k] = (d[k] - kOff * d[k - 1]) / denom;
  }
  for (size_t k = n - 1; k-- > 0;) d[k] -= c[k] * d[k + 1];
}

int32_t ToIndex(double q) {
  if (!(std::abs(q) < 2147483647.0)) {
    Fail(ErrorKind::kNumeric, "quantization index out of int32 range");
  }
  return static_cast<int32_t>(q);
}

}  // namespace

UniformQuantized QuantizeUniform(const Matrix& y) {
  UniformQuantized out;
  out.indices.resize(y.rows(), y.cols());
  out.reconstruction.resize(y.rows(), y.cols());
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double r = std::round(y.data()[k]);
    out.indices.data()[k] = ToIndex(r);
    out.reconstruction.data()[k] = r;
  }
  return out;
}

double DeadzoneQuantizer::offset() const {
  return reconstruction_offset >= 0.0 ? reconstruction_offset
                                      : 0.25 * (zone_ratio - 1.0);
}

DeadzoneQuantized QuantizeDeadzone(const Matrix& v, const DeadzoneQuantizer& q) {
  if (!(q.step > 0.0)) Fail(ErrorKind::kArgument, "dead-zone step must be > 0");
  if (!(q.zone_ratio >= 1.0)) {
    Fail(ErrorKind::kArgument, "dead-zone ratio must be >= 1");
  }
  const double shift = 1.0 - 0.5 * q.zone_ratio;
  const double offset = q.offset();
  DeadzoneQuantized out;
  out.indices.resize(v.rows(), v.cols());
  out.reconstruction.resize(v.rows(), v.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double x = v.data()[k];
    const double mag = std::max(0.0, std::floor(std::abs(x) / q.step + shift));
    const double sgn = x < 0 ? -1.0 : 1.0;
    out.indices.data()[k] = ToIndex(sgn * mag);
    out.reconstruction.data()[k] = mag == 0.0 ? 0.0 : sgn * (mag + offset) * q.step;
  }
  return out;
}

Matrix UniformNoise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix noise(rows, cols);
  for (Eigen::Index k = 0; k < noise.size(); ++k) {
    noise.data()[k] = rng.UniformOpen() - 0.5;
  }
  return noise;
}

NoisySample Perturb(const Matrix& y, Rng& rng) {
  NoisySample s;
  s.noise = UniformNoise(y.rows(), y.cols(), rng);
  s.noisy = y + s.noise;
  return s;
}

DensityModel::DensityModel(int channels, double spacing, double floor)
    : spacing_(spacing), floor_(floor) {
  if (channels < 1 || !(spacing > 0.0) || !(floor > 0.0)) {
    Fail(ErrorKind::kArgument, "invalid density model configuration");
  }
  const auto margin = static_cast<int64_t>(std::ceil(kMargin / spacing - 1e-9));
  Channel ch;
  ch.first_index = -margin;
  ch.values.assign(static_cast<size_t>(2 * margin + 1),
                   1.0 / (2.0 * margin * spacing));
  channels_.assign(channels, ch);
}

double DensityModel::KnotPosition(int c, size_t k) const {
  return static_cast<double>(channels_[c].first_index + static_cast<int64_t>(k)) *
         spacing_;
}

void DensityModel::Widen(Channel* ch, int64_t lo_index, int64_t hi_index) {
  const int64_t first = ch->first_index;
  const int64_t last = first + static_cast<int64_t>(ch->count()) - 1;
  int64_t ext_lo = std::max<int64_t>(0, first - lo_index);
  int64_t ext_hi = std::max<int64_t>(0, hi_index - last);
  if (ext_lo == 0 && ext_hi == 0) return;
  const int64_t room =
      std::max<int64_t>(0, static_cast<int64_t>(kMaxKnots) -
                               static_cast<int64_t>(ch->count()));
  if (ext_lo + ext_hi > room) {
    const int64_t lo_cap = std::min(ext_lo, std::max(room / 2, room - ext_hi));
    ext_hi = std::min(ext_hi, room - lo_cap);
    ext_lo = lo_cap;
  }
  ch->values.insert(ch->values.begin(), static_cast<size_t>(ext_lo), 0.0);
  ch->values.insert(ch->values.end(), static_cast<size_t>(ext_hi), 0.0);
  ch->first_index -= ext_lo;
}

void DensityModel::Normalize(Channel* ch) const {
  auto& v = ch->values;
  const size_t n = v.size();
  for (double& x : v) {
    if (!std::isfinite(x)) Fail(ErrorKind::kNumeric, "non-finite density value");
    x = std::max(x, 0.0);
  }
  auto weight = [n](size_t k) { return (k == 0 || k + 1 == n) ? 0.5 : 1.0; };
  // Find c with spacing * sum_k w_k max(c v_k, floor) == 1. The set of
  // floored knots only grows as c shrinks, so the iteration terminates.
  double raw = 0.0;
  for (size_t k = 0; k < n; ++k) raw += weight(k) * v[k];
  raw *= spacing_;
  double scale = raw > 0.0 ? 1.0 / raw : 0.0;
  if (scale > 0.0) {
    for (int iter = 0; iter < 64; ++iter) {
      double free_mass = 0.0;
      double floor_mass = 0.0;
      for (size_t k = 0; k < n; ++k) {
        if (scale * v[k] > floor_) {
          free_mass += weight(k) * v[k];
        } else {
          floor_mass += weight(k) * floor_;
        }
      }
      free_mass *= spacing_;
      floor_mass *= spacing_;
      if (free_mass <= 0.0 || floor_mass >= 1.0) {
        scale = 0.0;
        break;
      }
      const double next = (1.0 - floor_mass) / free_mass;
      if (next == scale) break;
      scale = next;
    }
  }
  if (scale == 0.0) {
    // Degenerate: fall back to a flat density over the lattice.
    std::fill(v.begin(), v.end(), 1.0 / (spacing_ * static_cast<double>(n - 1)));
    return;
  }
  for (double& x : v) x = std::max(scale * x, floor_);
}

void DensityModel::Update(const Matrix& samples, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    Fail(ErrorKind::kArgument, "density update rate must lie in (0, 1]");
  }
  if (samples.cols() == 0) return;
  if (samples.rows() != channels()) {
    Fail(ErrorKind::kArgument, "density update: sample rows != channels");
  }
  if (!samples.allFinite()) {
    Fail(ErrorKind::kNumeric, "density update: non-finite sample");
  }
  const auto margin = static_cast<int64_t>(std::ceil(kMargin / spacing_ - 1e-9));
  std::vector<double> hist;
  for (int c = 0; c < channels(); ++c) {
    Channel& ch = channels_[c];
    const auto row = samples.row(c);
    const double lo = row.minCoeff();
    const double hi = row.maxCoeff();
    Widen(&ch, static_cast<int64_t>(std::floor(lo / spacing_)) - margin,
          static_cast<int64_t>(std::ceil(hi / spacing_)) + margin);
    const size_t n = ch.count();
    hist.assign(n, 0.0);
    int64_t used = 0;
    const double top = static_cast<double>(n - 1);
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      const double u = row(j) / spacing_ - static_cast<double>(ch.first_index);
      if (!(u >= 0.0 && u <= top)) continue;
      auto k = static_cast<size_t>(u);
      if (k >= n - 1) k = n - 2;
      const double frac = u - static_cast<double>(k);
      hist[k] += 1.0 - frac;
      hist[k + 1] += frac;
      ++used;
    }
    if (used == 0) continue;
    const double norm = 1.0 / (static_cast<double>(used) * spacing_);
    for (double& h : hist) h *= norm;
    SolveHatGram(&hist);
    for (size_t k = 0; k < n; ++k) {
      ch.values[k] = (1.0 - rate) * ch.values[k] + rate * hist[k];
    }
    Normalize(&ch);
  }
}

DensityValue DensityModel::Eval(int c, double t) const {
  const Channel& ch = channels_[c];
  const size_t n = ch.count();
  const double u = t / spacing_ - static_cast<double>(ch.first_index);
  if (!(u >= 0.0 && u <= static_cast<double>(n - 1))) return {floor_, 0.0};
  auto k = static_cast<size_t>(u);
  if (k >= n - 1) k = n - 2;
  const double frac = u - static_cast<double>(k);
  const double a = ch.values[k];
  const double b = ch.values[k + 1];
  return {a + frac * (b - a), (b - a) / spacing_};
}

double DensityModel::Integral(int c) const {
  const auto& v = channels_[c].values;
  double s = 0.0;
  for (double x : v) s += x;
  s -= 0.5 * (v.front() + v.back());
  return s * spacing_;
}

double DensityModel::DifferentialEntropyBits(int c) const {
  const auto& v = channels_[c].values;
  // Antiderivative of p ln p with respect to p.
  auto f = [](double p) { return 0.5 * p * p * std::log(p) - 0.25 * p * p; };
  double nats = 0.0;
  for (size_t k = 0; k + 1 < v.size(); ++k) {
    const double a = v[k];
    const double b = v[k + 1];
    if (std::abs(b - a) <= 1e-9 * (a + b)) {
      const double m = 0.5 * (a + b);
      nats -= spacing_ * m * std::log(m);
    } else {
      nats -= spacing_ * (f(b) - f(a)) / (b - a);
    }
  }
  return nats / std::numbers::ln2;
}

DensityModel DensityModel::FromParts(double spacing, double floor,
                                     std::vector<Channel> channels) {
  if (!(spacing > 0.0) || !(floor > 0.0) || channels.empty()) {
    Fail(ErrorKind::kCorrupt, "density model: invalid spacing, floor or size");
  }
  for (const auto& ch : channels) {
    if (ch.count() < 2 || ch.count() > kMaxKnots) {
      Fail(ErrorKind::kCorrupt, "density model: invalid knot count");
    }
    for (double x : ch.values) {
      if (!std::isfinite(x) || x < 0.0) {
        Fail(ErrorKind::kCorrupt, "density model: invalid knot value");
      }
    }
  }
  DensityModel m;
  m.spacing_ = spacing;
  m.floor_ = floor;
  m.channels_ = std::move(channels);
  return m;
}

bool DensityModel::operator==(const DensityModel& o) const {
  if (spacing_ != o.spacing_ || floor_ != o.floor_ ||
      channels_.size() != o.channels_.size()) {
    return false;
  }
  for (size_t c = 0; c < channels_.size(); ++c) {
    if (channels_[c].first_index != o.channels_[c].first_index ||
        channels_[c].values != o.channels_[c].values) {
      return false;
    }
  }
  return true;
}

RateProxy RateProxyBits(const DensityModel& model, const Matrix& noisy) {
  if (noisy.rows() != model.channels()) {
    Fail(ErrorKind::kArgument, "rate proxy: rows != density channels");
  }
  RateProxy r;
  r.bits = 0.0;
  r.gradient.resize(noisy.rows(), noisy.cols());
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  for (Eigen::Index n = 0; n < noisy.cols(); ++n) {
    for (Eigen::Index c = 0; c < noisy.rows(); ++c) {
      const DensityValue d = model.Eval(static_cast<int>(c), noisy(c, n));
      r.bits -= std::log2(d.density);
      r.gradient(c, n) = -d.slope / d.density * inv_ln2;
    }
  }
  return r;
}

IntegerPmf PmfAtIntegers(const DensityModel& model, int c) {
  IntegerPmf pmf;
  pmf.first = static_cast<int64_t>(std::ceil(model.LowerBound(c)));
  const auto last = static_cast<int64_t>(std::floor(model.UpperBound(c)));
  double total = 0.0;
  for (int64_t n = pmf.first; n <= last; ++n) {
    const double p = model.Eval(c, static_cast<double>(n)).density;
    pmf.probs.push_back(p);
    total += p;
  }
  for (double& p : pmf.probs) p /= total;
  return pmf;
}

double EntropyBits(std::span<const double> pmf) {
  double h = 0.0;
  for (double p : pmf) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

void EntropyAccumulator::Add(const IndexMatrix& q) {
  if (q.size() == 0) return;
  if (q.rows() != static_cast<Eigen::Index>(counts_.size())) {
    Fail(ErrorKind::kArgument, "entropy accumulator: channel count mismatch");
  }
  for (Eigen::Index n = 0; n < q.cols(); ++n) {
    for (Eigen::Index c = 0; c < q.rows(); ++c) ++counts_[c][q(c, n)];
  }
  samples_ += q.cols();
}

double EntropyAccumulator::ChannelBits(int c) const {
  double h = 0.0;
  const double total = static_cast<double>(samples_);
  for (const auto& [symbol, count] : counts_[c]) {
    const double p = static_cast<double>(count) / total;
    h -= p * std::log2(p);
  }
  return h;
}

double EntropyAccumulator::BitsPerPixel() const {
  if (samples_ == 0) Fail(ErrorKind::kArgument, "entropy of an empty ensemble");
  double bits = 0.0;
  for (int c = 0; c < static_cast<int>(counts_.size()); ++c) bits += ChannelBits(c);
  return bits / static_cast<double>(counts_.size());
}

double DiscreteEntropy(const IndexMatrix& q) {
  EntropyAccumulator acc(static_cast<int>(q.rows()));
  acc.Add(q);
  return acc.BitsPerPixel();
}

}  // namespace ntc
