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

#include "ntc/perceptual.h"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace ntc {

namespace {

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16,
                                             4.0 / 16, 1.0 / 16};

// Adjoint of correlating along one axis (0: down the columns, 1: along
// the rows) with reflected borders.
PlaneArray Filter1DAdjoint(const PlaneArray& g, std::span<const double> k,
                           int axis, double gain) {
  const int h = static_cast<int>(g.rows());
  const int w = static_cast<int>(g.cols());
  const int r = static_cast<int>(k.size()) / 2;
  const int taps = 2 * r + 1;
  PlaneArray out = PlaneArray::Zero(h, w);
  std::vector<double*> rows(taps);
  for (int y = 0; y < h; ++y) {
    const double* src = &g(y, 0);
    if (axis == 1) {
      double* dst = &out(y, 0);
      for (int x = 0; x < w; ++x) {
        const double v = gain * src[x];
        if (v == 0.0) continue;
        if (x >= r && x < w - r) {
          for (int t = 0; t < taps; ++t) dst[x - r + t] += k[t] * v;
        } else {
          for (int t = 0; t < taps; ++t) dst[ReflectIndex(x - r + t, w)] += k[t] * v;
        }
      }
    } else {
      for (int t = 0; t < taps; ++t) rows[t] = &out(ReflectIndex(y - r + t, h), 0);
      for (int x = 0; x < w; ++x) {
        const double v = gain * src[x];
        if (v == 0.0) continue;
        for (int t = 0; t < taps; ++t) rows[t][x] += k[t] * v;
      }
    }
  }
  return out;
}

// Correlation along one axis followed by keeping every other sample
// (starting at 0) along that axis; only the kept samples are computed.
PlaneArray FilterDecimate(const PlaneArray& in, std::span<const double> k, int axis) {
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  const int r = static_cast<int>(k.size()) / 2;
  const int taps = 2 * r + 1;
  const int oh = axis == 0 ? (h + 1) / 2 : h;
  const int ow = axis == 1 ? (w + 1) / 2 : w;
  PlaneArray out(oh, ow);
  std::vector<const double*> rows(taps);
  for (int oy = 0; oy < oh; ++oy) {
    double* dst = &out(oy, 0);
    if (axis == 1) {
      const double* src = &in(oy, 0);
      for (int ox = 0; ox < ow; ++ox) {
        const int x = 2 * ox;
        double s = 0.0;
        if (x >= r && x < w - r) {
          for (int t = 0; t < taps; ++t) s += k[t] * src[x - r + t];
        } else {
          for (int t = 0; t < taps; ++t) s += k[t] * src[ReflectIndex(x - r + t, w)];
        }
        dst[ox] = s;
      }
    } else {
      const int y = 2 * oy;
      for (int t = 0; t < taps; ++t) rows[t] = &in(ReflectIndex(y - r + t, h), 0);
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int t = 0; t < taps; ++t) s += k[t] * rows[t][x];
        dst[x] = s;
      }
    }
  }
  return out;
}

PlaneArray BlurAdjoint(const PlaneArray& g, double gain = 1.0) {
  return Filter1DAdjoint(Filter1DAdjoint(g, kBinomial, 0, gain), kBinomial, 1,
                         gain);
}

PlaneArray Downsample(const PlaneArray& in) {
  const Eigen::Index h = (in.rows() + 1) / 2;
  const Eigen::Index w = (in.cols() + 1) / 2;
  PlaneArray out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) out(y, x) = in(2 * y, 2 * x);
  }
  return out;
}

// Zero insertion to (h, w); also the adjoint of Downsample.
PlaneArray Upsample(const PlaneArray& in, Eigen::Index h, Eigen::Index w) {
  PlaneArray out = PlaneArray::Zero(h, w);
  for (Eigen::Index y = 0; y < in.rows(); ++y) {
    for (Eigen::Index x = 0; x < in.cols(); ++x) out(2 * y, 2 * x) = in(y, x);
  }
  return out;
}

// Equal to Downsample(Blur(g)).
PlaneArray Reduce(const PlaneArray& g) {
  return FilterDecimate(FilterDecimate(g, kBinomial, 1), kBinomial, 0);
}

PlaneArray ReduceAdjoint(const PlaneArray& g, Eigen::Index h, Eigen::Index w) {
  return BlurAdjoint(Upsample(g, h, w));
}

// Equal to Blur(Upsample(g, h, w), 2.0), skipping the inserted zero rows.
PlaneArray Expand(const PlaneArray& g, Eigen::Index h, Eigen::Index w) {
  const PlaneArray up = Upsample(g, h, w);
  const int ih = static_cast<int>(h);
  const int iw = static_cast<int>(w);
  const int r = static_cast<int>(kBinomial.size()) / 2;
  const int taps = 2 * r + 1;
  PlaneArray mid = PlaneArray::Zero(h, w);
  for (int y = 0; y < ih; y += 2) {
    const double* src = &up(y, 0);
    double* dst = &mid(y, 0);
    for (int x = 0; x < iw; ++x) {
      double s = 0.0;
      if (x >= r && x < iw - r) {
        for (int t = 0; t < taps; ++t) s += kBinomial[t] * src[x - r + t];
      } else {
        for (int t = 0; t < taps; ++t) s += kBinomial[t] * src[ReflectIndex(x - r + t, iw)];
      }
      dst[x] = 2.0 * s;
    }
  }
  PlaneArray out(h, w);
  std::vector<const double*> rows;
  std::vector<double> weights;
  for (int y = 0; y < ih; ++y) {
    rows.clear();
    weights.clear();
    for (int t = 0; t < taps; ++t) {
      const int yy = ReflectIndex(y - r + t, ih);
      if (yy % 2 == 0) {
        rows.push_back(&mid(yy, 0));
        weights.push_back(kBinomial[t]);
      }
    }
    double* dst = &out(y, 0);
    for (int x = 0; x < iw; ++x) {
      double s = 0.0;
      for (size_t t = 0; t < rows.size(); ++t) s += weights[t] * rows[t][x];
      dst[x] = 2.0 * s;
    }
  }
  return out;
}

PlaneArray ExpandAdjoint(const PlaneArray& g) {
  return Downsample(BlurAdjoint(g, 2.0));
}

PlaneArray PoolKernel(const NlpConfig& cfg) {
  return Eigen::Map<const PlaneArray>(cfg.pool.data(), cfg.pool_side,
                                      cfg.pool_side);
}

std::vector<double> ParseList(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ParseDouble(item));
  return out;
}

std::string JoinList(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += FormatDouble(v[i]);
  }
  return s;
}

void CheckSameShape(const PlaneArray& a, const PlaneArray& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    Fail(ErrorKind::kArgument, std::string(what) + ": image dimensions differ");
  }
}

}  // namespace

int ReflectIndex(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

PlaneArray Correlate2D(const PlaneArray& in, const PlaneArray& kernel) {
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  const int ry = static_cast<int>(kernel.rows()) / 2;
  const int rx = static_cast<int>(kernel.cols()) / 2;
  PlaneArray out(h, w);
  for (int y = 0; y < h; ++y) {
    const bool inner_y = y >= ry && y < h - ry;
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      if (inner_y && x >= rx && x < w - rx) {
        for (int dy = -ry; dy <= ry; ++dy) {
          const double* row = &in(y + dy, x - rx);
          for (int dx = -rx; dx <= rx; ++dx) {
            s += kernel(dy + ry, dx + rx) * row[dx + rx];
          }
        }
      } else {
        for (int dy = -ry; dy <= ry; ++dy) {
          const int yy = ReflectIndex(y + dy, h);
          for (int dx = -rx; dx <= rx; ++dx) {
            s += kernel(dy + ry, dx + rx) * in(yy, ReflectIndex(x + dx, w));
          }
        }
      }
      out(y, x) = s;
    }
  }
  return out;
}

PlaneArray Correlate2DAdjoint(const PlaneArray& out_grad,
                              const PlaneArray& kernel) {
  const int h = static_cast<int>(out_grad.rows());
  const int w = static_cast<int>(out_grad.cols());
  const int ry = static_cast<int>(kernel.rows()) / 2;
  const int rx = static_cast<int>(kernel.cols()) / 2;
  PlaneArray in_grad = PlaneArray::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = out_grad(y, x);
      if (g == 0.0) continue;
      const bool inner = y >= ry && y < h - ry && x >= rx && x < w - rx;
      for (int dy = -ry; dy <= ry; ++dy) {
        const int yy = inner ? y + dy : ReflectIndex(y + dy, h);
        for (int dx = -rx; dx <= rx; ++dx) {
          const int xx = inner ? x + dx : ReflectIndex(x + dx, w);
          in_grad(yy, xx) += kernel(dy + ry, dx + rx) * g;
        }
      }
    }
  }
  return in_grad;
}

NlpConfig NlpConfig::Default(int levels) {
  NlpConfig cfg;
  cfg.levels = levels;
  cfg.sigma.assign(levels + 1, 0.17);
  cfg.pool_side = 3;
  cfg.pool.assign(9, 1.0 / 9.0);
  return cfg;
}

void NlpConfig::Validate() const {
  if (levels < 1) Fail(ErrorKind::kArgument, "NLP needs at least one level");
  if (sigma.size() != static_cast<size_t>(levels) + 1) {
    Fail(ErrorKind::kArgument, "NLP sigma needs levels + 1 entries");
  }
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      Fail(ErrorKind::kArgument, "NLP sigma must be positive");
    }
  }
  if (pool_side < 1 || pool_side % 2 == 0 ||
      pool.size() != static_cast<size_t>(pool_side) * pool_side) {
    Fail(ErrorKind::kArgument, "NLP pooling kernel must be odd and square");
  }
  for (double k : pool) {
    if (!(k >= 0.0) || !std::isfinite(k)) {
      Fail(ErrorKind::kArgument, "NLP pooling kernel must be nonnegative");
    }
  }
  if (!(inner_exponent >= 1.0) || !(outer_exponent >= 1.0)) {
    Fail(ErrorKind::kArgument, "NLP exponents must be >= 1");
  }
}

std::string NlpConfig::ToText() const {
  std::string s;
  s += "levels=" + std::to_string(levels) + "\n";
  s += "sigma=" + JoinList(sigma) + "\n";
  s += "pool_side=" + std::to_string(pool_side) + "\n";
  s += "pool=" + JoinList(pool) + "\n";
  s += "inner_exponent=" + FormatDouble(inner_exponent) + "\n";
  s += "outer_exponent=" + FormatDouble(outer_exponent) + "\n";
  return s;
}

NlpConfig NlpConfig::FromText(const std::string& text) {
  NlpConfig cfg;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorKind::kDecode, "NLP config: malformed line '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "levels") {
      cfg.levels = static_cast<int>(ParseDouble(value));
    } else if (key == "sigma") {
      cfg.sigma = ParseList(value);
    } else if (key == "pool_side") {
      cfg.pool_side = static_cast<int>(ParseDouble(value));
    } else if (key == "pool") {
      cfg.pool = ParseList(value);
    } else if (key == "inner_exponent") {
      cfg.inner_exponent = ParseDouble(value);
    } else if (key == "outer_exponent") {
      cfg.outer_exponent = ParseDouble(value);
    } else {
      Fail(ErrorKind::kDecode, "NLP config: unknown key '" + key + "'");
    }
  }
  try {
    cfg.Validate();
  } catch (const Error& e) {
    Fail(ErrorKind::kDecode, std::string("NLP config: ") + e.what());
  }
  return cfg;
}

PyramidBands LpBuild(const PlaneArray& x, int levels) {
  if (levels < 1) Fail(ErrorKind::kArgument, "pyramid needs at least one level");
  const Eigen::Index min_dim = std::min(x.rows(), x.cols());
  if (min_dim < (Eigen::Index{1} << levels)) {
    Fail(ErrorKind::kArgument, "image " + std::to_string(x.cols()) + "x" +
                                   std::to_string(x.rows()) + " too small for " +
                                   std::to_string(levels) + " pyramid levels");
  }
  PyramidBands out;
  out.bands.reserve(levels + 1);
  PlaneArray g = x;
  for (int k = 0; k < levels; ++k) {
    PlaneArray next = Reduce(g);
    out.bands.push_back(g - Expand(next, g.rows(), g.cols()));
    g = std::move(next);
  }
  out.bands.push_back(std::move(g));
  return out;
}

PlaneArray LpCollapse(const PyramidBands& bands) {
  if (bands.bands.empty()) Fail(ErrorKind::kStructural, "empty pyramid");
  PlaneArray g = bands.bands.back();
  for (int k = bands.levels() - 1; k >= 0; --k) {
    const PlaneArray& band = bands.bands[k];
    if ((band.rows() + 1) / 2 != g.rows() || (band.cols() + 1) / 2 != g.cols()) {
      Fail(ErrorKind::kStructural,
           "pyramid level " + std::to_string(k) + " dimensions inconsistent");
    }
    g = band + Expand(g, band.rows(), band.cols());
  }
  return g;
}

PlaneArray LpBuildAdjoint(const PyramidBands& band_grads) {
  const int levels = band_grads.levels();
  PlaneArray acc = band_grads.bands[levels];
  for (int k = levels - 1; k >= 0; --k) {
    const PlaneArray& b = band_grads.bands[k];
    acc = b + ReduceAdjoint(acc - ExpandAdjoint(b), b.rows(), b.cols());
  }
  return acc;
}

NlpRepresentation NlpTransform(const PlaneArray& x, const NlpConfig& cfg) {
  cfg.Validate();
  const PlaneArray kernel = PoolKernel(cfg);
  PyramidBands lp = LpBuild(x, cfg.levels);
  NlpRepresentation z;
  for (int k = 0; k <= cfg.levels; ++k) {
    const PlaneArray& band = lp.bands[k];
    z.bands.push_back(band / (cfg.sigma[k] + Correlate2D(band.abs(), kernel)));
  }
  return z;
}

MetricValue NlpDistance(const PlaneArray& x, const PlaneArray& xhat,
                        const NlpConfig& cfg, bool want_gradient) {
  CheckSameShape(x, xhat, "nlp_distance");
  cfg.Validate();
  const PlaneArray kernel = PoolKernel(cfg);
  const int nb = cfg.levels + 1;
  const PyramidBands ref = LpBuild(x, cfg.levels);
  const PyramidBands rec = LpBuild(xhat, cfg.levels);
  const double p = cfg.inner_exponent;
  const double o = cfg.outer_exponent;

  std::vector<PlaneArray> amp(nb), err(nb);
  std::vector<double> band_norm(nb);
  double outer = 0.0;
  for (int k = 0; k < nb; ++k) {
    const PlaneArray& l = ref.bands[k];
    const PlaneArray& lh = rec.bands[k];
    const PlaneArray z = l / (cfg.sigma[k] + Correlate2D(l.abs(), kernel));
    amp[k] = cfg.sigma[k] + Correlate2D(lh.abs(), kernel);
    err[k] = lh / amp[k] - z;
    const double mean =
        p == 2.0 ? err[k].square().mean() : err[k].abs().pow(p).mean();
    band_norm[k] = std::pow(mean, 1.0 / p);
    outer += std::pow(band_norm[k], o);
  }
  MetricValue result;
  result.value = std::pow(outer / nb, 1.0 / o);
  if (!want_gradient) return result;

  PyramidBands grads;
  grads.bands.resize(nb);
  for (int k = 0; k < nb; ++k) {
    const PlaneArray& lh = rec.bands[k];
    const double r = band_norm[k];
    if (result.value == 0.0 || r == 0.0) {
      grads.bands[k] = PlaneArray::Zero(lh.rows(), lh.cols());
      continue;
    }
    const double n = static_cast<double>(lh.size());
    const double dd_dr = std::pow(result.value, 1.0 - o) * std::pow(r, o - 1.0) / nb;
    const double dr_scale = dd_dr * std::pow(r, 1.0 - p) / n;
    const PlaneArray zbar =
        p == 2.0 ? PlaneArray(dr_scale * err[k])
                 : PlaneArray(dr_scale * err[k].abs().pow(p - 1.0) * err[k].sign());
    // zh = lh / amp, amp = sigma + pool(|lh|).
    const PlaneArray amp_bar = -zbar * lh / amp[k].square();
    grads.bands[k] =
        zbar / amp[k] + lh.sign() * Correlate2DAdjoint(amp_bar, kernel);
  }
  result.gradient = LpBuildAdjoint(grads);
  return result;
}

double NlpDistance(const ImagePlane& x, const ImagePlane& xhat,
                   const NlpConfig& cfg) {
  return NlpDistance(ToArray(x), ToArray(xhat), cfg, false).value;
}

MetricValue MseWithGradient(const PlaneArray& x, const PlaneArray& xhat) {
  CheckSameShape(x, xhat, "mse");
  MetricValue m;
  const PlaneArray diff = xhat - x;
  m.value = diff.square().mean();
  m.gradient = diff * (2.0 / static_cast<double>(diff.size()));
  return m;
}

double Mse(const ImagePlane& x, const ImagePlane& xhat) {
  if (x.width != xhat.width || x.height != xhat.height) {
    Fail(ErrorKind::kArgument, "mse: image dimensions differ");
  }
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x.samples[i] - xhat.samples[i];
    s += d * d;
  }
  return x.size() ? s / static_cast<double>(x.size()) : 0.0;
}

double PsnrFromMse(double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double Psnr(const ImagePlane& x, const ImagePlane& xhat) {
  return PsnrFromMse(Mse(x, xhat));
}

}  // namespace ntc
