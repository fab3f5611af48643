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

// Block transforms: the fixed DCT, and a generalized divisive normalization
// (GDN) analysis stage paired with a one-step approximate inverse for
// synthesis. A linear transform is the GDN family with gamma = 0.
//
// Analysis:  v = H x,   y_i = v_i / (beta_i + sum_j gamma_ij |v_j|^alpha_ij)^eps_i
// Synthesis: w_i = yh_i * (beta'_i + sum_j gamma'_ij |yh_j|^alpha'_ij)^eps'_i,
//            xh = H' w
//
// All functions operate on a batch: one block (or code vector) per column.

#ifndef NTC_TRANSFORM_H_
#define NTC_TRANSFORM_H_

#include <cstdint>
#include <optional>

#include "ntc/common.h"

namespace ntc {

enum class TransformKind : uint8_t { kLinear = 0, kGdn = 1 };

const char* TransformKindName(TransformKind kind);
TransformKind ParseTransformKind(const std::string& name);

// Orthonormal 2-D DCT-II basis for B x B blocks; row u*B+v is the basis
// function with vertical frequency u and horizontal frequency v, applied to
// row-major flattened blocks.
Matrix MakeDctBasis(int block_side);

// One stage of parameters. The same layout serves the analysis transform
// (H, beta, gamma, alpha, eps) and the synthesis transform (H', ...), and is
// also used to carry their gradients.
struct GdnParams {
  Matrix filters;  // dim x dim
  Vector beta;     // > 0
  Matrix gamma;    // >= 0
  Matrix alpha;    // >= 1
  Vector epsilon;  // in (0, 1]

  int dim() const { return static_cast<int>(beta.size()); }
  static GdnParams Zero(int dim);
  bool operator==(const GdnParams& o) const;
};

// Throws kArgument when a shape or domain constraint is violated.
void ValidateParams(const GdnParams& p);

struct TransformParams {
  TransformKind kind = TransformKind::kGdn;
  int block_side = 16;
  GdnParams analysis;
  GdnParams synthesis;

  int dim() const { return block_side * block_side; }
  bool operator==(const TransformParams&) const = default;
};

// Which parameter gradients a backward pass should produce; the rest are
// returned as zeros.
struct GradRequest {
  bool filters = true;
  bool beta = true;
  bool gamma = true;
  bool alpha = false;
  bool epsilon = false;
  // The analysis input gradient; training does not need it.
  bool input = true;

  static GradRequest All() { return {true, true, true, true, true, true}; }
  static GradRequest For(TransformKind kind, bool train_exponents);
};

// Forward intermediates needed by the backward pass. `denominators` holds
// beta_i + sum_j gamma_ij |u_j|^alpha_ij before exponentiation.
struct GdnCache {
  Matrix input;         // x (analysis) or yh (synthesis)
  Matrix linear;        // v = H x (analysis only)
  Matrix denominators;  // pooled activity, pre-exponent
  Matrix scale;         // d^-eps (analysis) or d^eps (synthesis)
  Matrix output;        // y (analysis) or w (synthesis, pre-H')
  Matrix powers;        // |u|^alpha when alpha is a single shared value
};

struct GdnForward {
  Matrix output;  // y (analysis) or xh (synthesis)
  GdnCache cache;
};

struct GdnGradients {
  Matrix input;  // cotangent of the forward input
  GdnParams params;
};

GdnForward GdnAnalyze(const Matrix& x, const GdnParams& phi);
GdnForward GdnSynthesize(const Matrix& yhat, const GdnParams& theta);

GdnGradients GdnAnalyzeVjp(const GdnCache& cache, const GdnParams& phi,
                           const Matrix& ybar,
                           const GradRequest& request = {});
GdnGradients GdnSynthesizeVjp(const GdnCache& cache, const GdnParams& theta,
                              const Matrix& xbar,
                              const GradRequest& request = {});

// Random orthonormal H scaled by `gain`, with H' = H^-1. beta = 1,
// alpha = 2, eps = 0.5; gamma = `gamma_init` for kGdn and 0 for kLinear.
TransformParams InitParams(TransformKind kind, int block_side, Rng& rng,
                           double gain = 1.0, double gamma_init = 1e-3);

// Returns the shared exponent if every entry of `alpha` is equal.
std::optional<double> UniformExponent(const Matrix& alpha);

}  // namespace ntc

#endif  // NTC_TRANSFORM_H_
