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

// Distortion measures: Laplacian pyramid, normalized Laplacian pyramid
// (NLP) distance with its gradient, MSE and PSNR.

#ifndef NTC_PERCEPTUAL_H_
#define NTC_PERCEPTUAL_H_

#include <string>
#include <vector>

#include "ntc/common.h"
#include "ntc/image.h"

namespace ntc {

struct NlpConfig {
  int levels = 5;
  // One constant per band, bandpass levels first, lowpass residual last.
  std::vector<double> sigma;
  // Odd-sized square pooling kernel for local amplitude, row-major.
  int pool_side = 3;
  std::vector<double> pool;
  double inner_exponent = 2.0;  // within a band
  double outer_exponent = 2.0;  // across bands

  // 0.17 for every band, 3x3 uniform pooling, exponents 2/2.
  static NlpConfig Default(int levels = 5);

  // Throws kArgument when a constraint is violated.
  void Validate() const;
  // key=value lines; doubles use shortest round-trip formatting.
  std::string ToText() const;
  static NlpConfig FromText(const std::string& text);
  bool operator==(const NlpConfig&) const = default;
};

// bands[0..levels-1] are bandpass images, finest first; bands[levels] is
// the lowpass residual.
struct PyramidBands {
  std::vector<PlaneArray> bands;
  int levels() const { return static_cast<int>(bands.size()) - 1; }
};

// Burt-Adelson pyramid with the 5-tap binomial kernel [1 4 6 4 1]/16 and
// whole-sample symmetric boundaries. Needs min(width, height) >= 2^levels.
PyramidBands LpBuild(const PlaneArray& x, int levels);
PlaneArray LpCollapse(const PyramidBands& bands);
// Adjoint of LpBuild: maps band cotangents to an image cotangent.
PlaneArray LpBuildAdjoint(const PyramidBands& band_grads);

struct NlpRepresentation {
  std::vector<PlaneArray> bands;
};

// z_k = L_k / (sigma_k + pool * |L_k|).
NlpRepresentation NlpTransform(const PlaneArray& x, const NlpConfig& cfg);

struct MetricValue {
  double value = 0.0;
  PlaneArray gradient;  // with respect to the second (reconstructed) image
};

// Per-band power mean of |z_k - zh_k| (inner exponent), then a power mean
// over bands (outer exponent). With the default exponents this is the root
// mean over bands of per-band RMS differences.
MetricValue NlpDistance(const PlaneArray& x, const PlaneArray& xhat,
                        const NlpConfig& cfg, bool want_gradient = true);
double NlpDistance(const ImagePlane& x, const ImagePlane& xhat,
                   const NlpConfig& cfg);

MetricValue MseWithGradient(const PlaneArray& x, const PlaneArray& xhat);
double Mse(const ImagePlane& x, const ImagePlane& xhat);
// 10 log10(1 / mse) for unit-range intensities; +inf when mse == 0.
double PsnrFromMse(double mse);
double Psnr(const ImagePlane& x, const ImagePlane& xhat);

// Filtering primitives with whole-sample symmetric extension, exposed for
// tests.
int ReflectIndex(int i, int n);
PlaneArray Correlate2D(const PlaneArray& in, const PlaneArray& kernel);
PlaneArray Correlate2DAdjoint(const PlaneArray& out_grad,
                              const PlaneArray& kernel);

}  // namespace ntc

#endif  // NTC_PERCEPTUAL_H_
