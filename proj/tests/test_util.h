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

// Helpers shared by the unit and acceptance tests: random instances and
// central finite differences.

#ifndef NTC_TESTS_TEST_UTIL_H_
#define NTC_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ntc/common.h"
#include "ntc/image.h"
#include "ntc/transform.h"

namespace ntc {
namespace testing {

inline Matrix RandomMatrix(int rows, int cols, Rng& rng, double lo = -1.0,
                           double hi = 1.0) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = lo + (hi - lo) * rng.Uniform();
  }
  return m;
}

inline Vector RandomVector(int n, Rng& rng, double lo, double hi) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = lo + (hi - lo) * rng.Uniform();
  return v;
}

inline ImagePlane RandomImage(int w, int h, Rng& rng) {
  ImagePlane img(w, h);
  for (double& s : img.samples) s = rng.Uniform();
  return img;
}

// Feasible parameters away from the constraint boundaries. With
// `free_alpha` the exponents vary per entry, otherwise alpha is 2.
inline GdnParams RandomGdnParams(int d, Rng& rng, bool free_alpha) {
  GdnParams p;
  p.filters = RandomMatrix(d, d, rng);
  p.beta = RandomVector(d, rng, 0.5, 1.5);
  p.gamma = RandomMatrix(d, d, rng, 0.05, 0.5);
  p.alpha = free_alpha ? RandomMatrix(d, d, rng, 1.2, 2.8) : Matrix::Constant(d, d, 2.0);
  p.epsilon = RandomVector(d, rng, 0.3, 0.9);
  return p;
}

// ||a - n|| / ||n||, with the norm of `n` floored so that an all-zero
// oracle does not divide by zero.
inline double RelativeError(const Vector& analytic, const Vector& numeric) {
  const double scale = std::max(numeric.norm(), 1e-12);
  return (analytic - numeric).norm() / scale;
}

// Central differences of a scalar function along every coordinate.
inline Vector NumericGradient(const std::function<double(const Vector&)>& f,
                              const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline Vector Flatten(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix Unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// Worst relative error over the input and every requested parameter
// gradient of a GDN stage, checked against central differences of
// <cotangent, forward(x, params)>.
inline double GdnVjpError(bool synthesis, const Matrix& x, const GdnParams& params,
                          const Matrix& cotangent, const GradRequest& req,
                          double h = 1e-6) {
  auto forward = [synthesis](const Matrix& in, const GdnParams& p) {
    return synthesis ? GdnSynthesize(in, p) : GdnAnalyze(in, p);
  };
  const GdnForward fwd = forward(x, params);
  const GdnGradients g =
      synthesis ? GdnSynthesizeVjp(fwd.cache, params, cotangent, req)
                : GdnAnalyzeVjp(fwd.cache, params, cotangent, req);
  auto objective = [&](const Matrix& in, const GdnParams& p) {
    return (forward(in, p).output.array() * cotangent.array()).sum();
  };
  double worst = RelativeError(
      Flatten(g.input),
      NumericGradient(
          [&](const Vector& v) {
            return objective(Unflatten(v, x.rows(), x.cols()), params);
          },
          Flatten(x), h));
  auto check = [&](bool wanted, auto member, const auto& analytic) {
    if (!wanted) return;
    const auto& value = params.*member;
    const Vector flat = Flatten(value);
    const Vector numeric = NumericGradient(
        [&](const Vector& v) {
          GdnParams p = params;
          p.*member = Unflatten(v, value.rows(), value.cols());
          return objective(x, p);
        },
        flat, h);
    worst = std::max(worst, RelativeError(Flatten(analytic), numeric));
  };
  check(req.filters, &GdnParams::filters, g.params.filters);
  check(req.beta, &GdnParams::beta, g.params.beta);
  check(req.gamma, &GdnParams::gamma, g.params.gamma);
  check(req.alpha, &GdnParams::alpha, g.params.alpha);
  check(req.epsilon, &GdnParams::epsilon, g.params.epsilon);
  return worst;
}

}  // namespace testing
}  // namespace ntc

#endif  // NTC_TESTS_TEST_UTIL_H_
