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

#include "ntc/transform.h"

#include <cmath>
#include <numbers>
#include <string>

namespace ntc {

namespace {

constexpr double kLogFloor = 1e-12;

double SafeLogAbs(double u) { return std::log(std::max(std::abs(u), kLogFloor)); }

// |u|^a, exact for the default a = 2.
Matrix PowAbs(const Matrix& u, double a) {
  if (a == 2.0) return u.array().square().matrix();
  if (a == 1.0) return u.array().abs().matrix();
  return u.array().abs().pow(a).matrix();
}

// d/du |u|^a, with the value at u == 0 taken as 0.
Matrix PowAbsDerivative(const Matrix& u, double a) {
  if (a == 2.0) return 2.0 * u;
  Matrix out(u.rows(), u.cols());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double v = u.data()[k];
    out.data()[k] =
        v == 0.0 ? 0.0 : a * std::pow(std::abs(v), a - 1.0) * (v > 0 ? 1.0 : -1.0);
  }
  return out;
}

void CheckFinite(const Matrix& m, const char* stage) {
  if (m.allFinite()) return;
  for (Eigen::Index n = 0; n < m.cols(); ++n) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, n))) {
        Fail(ErrorKind::kNumeric, std::string(stage) +
                                      ": non-finite value at coefficient " +
                                      std::to_string(i) + ", block " +
                                      std::to_string(n));
      }
    }
  }
}

// beta_i + sum_j gamma_ij |u_j|^alpha_ij for every column of u.
Matrix PooledActivity(const Matrix& u, const GdnParams& p, Matrix* powers) {
  const Eigen::Index d = u.rows();
  const Eigen::Index n = u.cols();
  Matrix act(d, n);
  if (p.gamma.isZero(0.0)) {
    act = p.beta.replicate(1, n);
    return act;
  }
  if (auto a = UniformExponent(p.alpha)) {
    *powers = PowAbs(u, *a);
    act.noalias() = p.gamma * *powers;
    act.colwise() += p.beta;
    return act;
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index i = 0; i < d; ++i) {
      double s = p.beta(i);
      for (Eigen::Index j = 0; j < d; ++j) {
        const double g = p.gamma(i, j);
        if (g != 0.0) s += g * std::pow(std::abs(u(j, c)), p.alpha(i, j));
      }
      act(i, c) = s;
    }
  }
  return act;
}

// Backward pass of PooledActivity: accumulates into `ubar` and `grads`.
void PooledActivityVjp(const Matrix& u, const Matrix& cached_powers,
                       const GdnParams& p, const Matrix& dbar,
                       const GradRequest& req, Matrix* ubar, GdnParams* grads) {
  if (req.beta) grads->beta = dbar.rowwise().sum();
  const bool gamma_zero = p.gamma.isZero(0.0);
  if (gamma_zero && !req.gamma) return;
  const Eigen::Index d = u.rows();
  const Eigen::Index n = u.cols();
  if (auto a = UniformExponent(p.alpha)) {
    const Matrix powers = cached_powers.size() ? cached_powers : PowAbs(u, *a);
    if (req.gamma) grads->gamma.noalias() = dbar * powers.transpose();
    if (req.alpha && !gamma_zero) {
      Matrix plog(d, n);
      for (Eigen::Index k = 0; k < u.size(); ++k) {
        const double v = u.data()[k];
        plog.data()[k] = v == 0.0 ? 0.0 : powers.data()[k] * SafeLogAbs(v);
      }
      grads->alpha = p.gamma.cwiseProduct(dbar * plog.transpose());
    }
    if (!gamma_zero) {
      *ubar += (p.gamma.transpose() * dbar).cwiseProduct(PowAbsDerivative(u, *a));
    }
    return;
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = u(j, c);
      const double av = std::abs(v);
      const double sgn = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
      const double lg = SafeLogAbs(v);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double db = dbar(i, c);
        const double a = p.alpha(i, j);
        const double pw = std::pow(av, a);
        if (req.gamma) grads->gamma(i, j) += db * pw;
        const double g = p.gamma(i, j);
        if (g == 0.0) continue;
        if (req.alpha && v != 0.0) grads->alpha(i, j) += db * g * pw * lg;
        if (v != 0.0) acc += db * g * a * std::pow(av, a - 1.0) * sgn;
      }
      (*ubar)(j, c) += acc;
    }
  }
}

// d^(sign * eps) per row, column by column to keep memory access contiguous.
Matrix ScaleFactors(const Matrix& d, const Vector& eps, double sign) {
  Matrix scale(d.rows(), d.cols());
  if ((eps.array() == 0.5).all()) {
    if (sign < 0) {
      scale = d.array().rsqrt();
    } else {
      scale = d.array().sqrt();
    }
    return scale;
  }
  const Eigen::ArrayXd e = sign * eps.array();
  for (Eigen::Index c = 0; c < d.cols(); ++c) {
    scale.col(c) = d.col(c).array().pow(e);
  }
  return scale;
}

void CheckInput(const Matrix& in, const GdnParams& p, const char* stage) {
  ValidateParams(p);
  if (in.rows() != p.dim()) {
    Fail(ErrorKind::kArgument, std::string(stage) + ": input has " +
                                   std::to_string(in.rows()) +
                                   " rows, parameters expect " +
                                   std::to_string(p.dim()));
  }
}

}  // namespace

const char* TransformKindName(TransformKind kind) {
  return kind == TransformKind::kLinear ? "linear" : "gdn";
}

TransformKind ParseTransformKind(const std::string& name) {
  if (name == "linear") return TransformKind::kLinear;
  if (name == "gdn") return TransformKind::kGdn;
  Fail(ErrorKind::kArgument, "unknown transform kind '" + name + "'");
}

Matrix MakeDctBasis(int block_side) {
  if (block_side < 1) Fail(ErrorKind::kArgument, "DCT block side must be >= 1");
  const int b = block_side;
  Matrix c1(b, b);
  for (int u = 0; u < b; ++u) {
    const double norm = std::sqrt((u == 0 ? 1.0 : 2.0) / b);
    for (int r = 0; r < b; ++r) {
      c1(u, r) = norm * std::cos(std::numbers::pi * (2 * r + 1) * u / (2.0 * b));
    }
  }
  Matrix basis(b * b, b * b);
  for (int u = 0; u < b; ++u) {
    for (int v = 0; v < b; ++v) {
      for (int r = 0; r < b; ++r) {
        for (int c = 0; c < b; ++c) {
          basis(u * b + v, r * b + c) = c1(u, r) * c1(v, c);
        }
      }
    }
  }
  return basis;
}

GdnParams GdnParams::Zero(int dim) {
  GdnParams p;
  p.filters = Matrix::Zero(dim, dim);
  p.beta = Vector::Zero(dim);
  p.gamma = Matrix::Zero(dim, dim);
  p.alpha = Matrix::Zero(dim, dim);
  p.epsilon = Vector::Zero(dim);
  return p;
}

bool GdnParams::operator==(const GdnParams& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(filters, o.filters) && same(beta, o.beta) &&
         same(gamma, o.gamma) && same(alpha, o.alpha) &&
         same(epsilon, o.epsilon);
}

void ValidateParams(const GdnParams& p) {
  const Eigen::Index d = p.beta.size();
  if (d == 0 || p.filters.rows() != d || p.filters.cols() != d ||
      p.gamma.rows() != d || p.gamma.cols() != d || p.alpha.rows() != d ||
      p.alpha.cols() != d || p.epsilon.size() != d) {
    Fail(ErrorKind::kArgument, "GDN parameter shapes are inconsistent");
  }
  if (!p.filters.allFinite()) Fail(ErrorKind::kArgument, "non-finite filters");
  if (!(p.beta.array() > 0.0).all() || !p.beta.allFinite()) {
    Fail(ErrorKind::kArgument, "beta must be positive and finite");
  }
  if (!(p.gamma.array() >= 0.0).all() || !p.gamma.allFinite()) {
    Fail(ErrorKind::kArgument, "gamma must be nonnegative and finite");
  }
  if (!(p.alpha.array() >= 1.0).all() || !p.alpha.allFinite()) {
    Fail(ErrorKind::kArgument, "alpha must be >= 1 and finite");
  }
  if (!(p.epsilon.array() > 0.0).all() || !(p.epsilon.array() <= 1.0).all()) {
    Fail(ErrorKind::kArgument, "epsilon must lie in (0, 1]");
  }
}

GradRequest GradRequest::For(TransformKind kind, bool train_exponents) {
  if (kind == TransformKind::kLinear) return {true, false, false, false, false};
  return {true, true, true, train_exponents, train_exponents};
}

std::optional<double> UniformExponent(const Matrix& alpha) {
  if (alpha.size() == 0) return std::nullopt;
  const double a = alpha(0, 0);
  if ((alpha.array() == a).all()) return a;
  return std::nullopt;
}

GdnForward GdnAnalyze(const Matrix& x, const GdnParams& phi) {
  CheckInput(x, phi, "gdn_analyze");
  GdnForward f;
  GdnCache& c = f.cache;
  c.input = x;
  c.linear.noalias() = phi.filters * x;
  c.denominators = PooledActivity(c.linear, phi, &c.powers);
  c.scale = ScaleFactors(c.denominators, phi.epsilon, -1.0);
  c.output = c.linear.cwiseProduct(c.scale);
  CheckFinite(c.output, "gdn_analyze");
  f.output = c.output;
  return f;
}

GdnForward GdnSynthesize(const Matrix& yhat, const GdnParams& theta) {
  CheckInput(yhat, theta, "gdn_synthesize");
  GdnForward f;
  GdnCache& c = f.cache;
  c.input = yhat;
  c.denominators = PooledActivity(yhat, theta, &c.powers);
  c.scale = ScaleFactors(c.denominators, theta.epsilon, 1.0);
  c.output = yhat.cwiseProduct(c.scale);
  f.output.noalias() = theta.filters * c.output;
  CheckFinite(f.output, "gdn_synthesize");
  return f;
}

GdnGradients GdnAnalyzeVjp(const GdnCache& cache, const GdnParams& phi,
                           const Matrix& ybar, const GradRequest& request) {
  if (ybar.rows() != cache.output.rows() || ybar.cols() != cache.output.cols()) {
    Fail(ErrorKind::kArgument, "gdn_analyze_vjp: cotangent shape mismatch");
  }
  const int d = phi.dim();
  GdnGradients g;
  g.params = GdnParams::Zero(d);
  Matrix vbar = ybar.cwiseProduct(cache.scale);
  // d/dd of v * d^-eps is -eps * v * d^-eps / d.
  Matrix dbar = ybar.cwiseProduct(cache.output)
                    .cwiseQuotient(cache.denominators);
  dbar.array().colwise() *= -phi.epsilon.array();
  if (request.epsilon) {
    g.params.epsilon =
        -(ybar.cwiseProduct(cache.output).cwiseProduct(
              Matrix(cache.denominators.array().log())))
             .rowwise()
             .sum();
  }
  PooledActivityVjp(cache.linear, cache.powers, phi, dbar, request, &vbar,
                    &g.params);
  if (request.filters) g.params.filters.noalias() = vbar * cache.input.transpose();
  if (request.input) g.input.noalias() = phi.filters.transpose() * vbar;
  return g;
}

GdnGradients GdnSynthesizeVjp(const GdnCache& cache, const GdnParams& theta,
                              const Matrix& xbar, const GradRequest& request) {
  if (xbar.rows() != cache.output.rows() || xbar.cols() != cache.output.cols()) {
    Fail(ErrorKind::kArgument, "gdn_synthesize_vjp: cotangent shape mismatch");
  }
  const int d = theta.dim();
  GdnGradients g;
  g.params = GdnParams::Zero(d);
  const Matrix wbar = theta.filters.transpose() * xbar;
  if (request.filters) g.params.filters.noalias() = xbar * cache.output.transpose();
  Matrix ybar = wbar.cwiseProduct(cache.scale);
  // d/dd of yh * d^eps is eps * yh * d^eps / d = eps * w / d.
  Matrix dbar = wbar.cwiseProduct(cache.output).cwiseQuotient(cache.denominators);
  dbar.array().colwise() *= theta.epsilon.array();
  if (request.epsilon) {
    g.params.epsilon = (wbar.cwiseProduct(cache.output).cwiseProduct(
                            Matrix(cache.denominators.array().log())))
                           .rowwise()
                           .sum();
  }
  PooledActivityVjp(cache.input, cache.powers, theta, dbar, request, &ybar,
                    &g.params);
  g.input = std::move(ybar);
  return g;
}

TransformParams InitParams(TransformKind kind, int block_side, Rng& rng,
                           double gain, double gamma_init) {
  if (block_side < 1) Fail(ErrorKind::kArgument, "block side must be >= 1");
  if (!(gain > 0.0)) Fail(ErrorKind::kArgument, "init gain must be positive");
  const int d = block_side * block_side;
  Matrix gauss(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) gauss(i, j) = rng.Normal();
  }
  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  // Fix the column signs so Q is a deterministic function of the draw.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }

  TransformParams params;
  params.kind = kind;
  params.block_side = block_side;
  const double g = kind == TransformKind::kGdn ? gamma_init : 0.0;
  for (GdnParams* p : {&params.analysis, &params.synthesis}) {
    p->beta = Vector::Ones(d);
    p->gamma = Matrix::Constant(d, d, g);
    p->alpha = Matrix::Constant(d, d, 2.0);
    p->epsilon = Vector::Constant(d, 0.5);
  }
  params.analysis.filters = gain * q.transpose();
  params.synthesis.filters = q / gain;
  return params;
}

}  // namespace ntc
