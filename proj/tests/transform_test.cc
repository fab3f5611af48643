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

#include "gtest/gtest.h"
#include "test_util.h"

namespace ntc {
namespace {

using testing::GdnVjpError;
using testing::RandomGdnParams;
using testing::RandomMatrix;

GdnParams Identity(int d) {
  GdnParams p;
  p.filters = Matrix::Identity(d, d);
  p.beta = Vector::Ones(d);
  p.gamma = Matrix::Zero(d, d);
  p.alpha = Matrix::Constant(d, d, 2.0);
  p.epsilon = Vector::Constant(d, 0.5);
  return p;
}

TEST(DctBasisTest, Orthonormal) {
  for (int b : {1, 2, 4, 8, 16}) {
    const Matrix m = MakeDctBasis(b);
    EXPECT_LT((m * m.transpose() - Matrix::Identity(b * b, b * b)).cwiseAbs().maxCoeff(),
              1e-12);
  }
  Rng rng(1);
  const Matrix m = MakeDctBasis(8);
  const Vector x = testing::RandomVector(64, rng, -1, 1);
  EXPECT_NEAR((m * x).norm(), x.norm(), 1e-12);
}

TEST(DctBasisTest, MatchesClosedForm) {
  const int b = 4;
  const Matrix m = MakeDctBasis(b);
  auto c = [b](int k) { return k == 0 ? std::sqrt(1.0 / b) : std::sqrt(2.0 / b); };
  for (int u = 0; u < b; ++u) {
    for (int v = 0; v < b; ++v) {
      for (int y = 0; y < b; ++y) {
        for (int x = 0; x < b; ++x) {
          const double expected =
              c(u) * c(v) * std::cos(std::numbers::pi * (2 * y + 1) * u / (2 * b)) *
              std::cos(std::numbers::pi * (2 * x + 1) * v / (2 * b));
          EXPECT_NEAR(m(u * b + v, y * b + x), expected, 1e-14);
        }
      }
    }
  }
  const Matrix m2 = MakeDctBasis(2);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(m2(0, j), 0.5, 1e-15);
  EXPECT_NEAR(m2(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(m2(1, 1), -0.5, 1e-15);
  EXPECT_NEAR(m2(3, 1), -0.5, 1e-15);
}

TEST(DctBasisTest, ConstantBlockHasOnlyDc) {
  const Matrix m = MakeDctBasis(8);
  const Vector y = m * Vector::Constant(64, 0.3);
  EXPECT_NEAR(y(0), 0.3 * 8, 1e-12);
  EXPECT_LT(y.tail(63).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GdnAnalyzeTest, NoPoolingIsLinear) {
  Rng rng(2);
  GdnParams p = RandomGdnParams(9, rng, true);
  p.gamma.setZero();
  p.beta.setOnes();
  const Matrix x = RandomMatrix(9, 5, rng);
  EXPECT_LT((GdnAnalyze(x, p).output - p.filters * x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GdnAnalyzeTest, ClosedFormDenominator) {
  GdnParams p = Identity(3);
  p.beta.setConstant(4.0);
  Matrix x(3, 1);
  x << 1.0, -2.0, 5.0;
  EXPECT_LT((GdnAnalyze(x, p).output - x / 2.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GdnAnalyzeTest, TwoDimensionalExample) {
  GdnParams p = Identity(2);
  p.gamma = Matrix::Identity(2, 2);
  Matrix x(2, 1);
  x << 3.0, 4.0;
  const Matrix y = GdnAnalyze(x, p).output;
  EXPECT_NEAR(y(0), 3.0 / std::sqrt(10.0), 1e-15);
  EXPECT_NEAR(y(1), 4.0 / std::sqrt(17.0), 1e-15);
}

TEST(GdnAnalyzeTest, GeneralExponentsMatchScalarEvaluation) {
  Rng rng(3);
  const GdnParams p = RandomGdnParams(4, rng, true);
  const Matrix x = RandomMatrix(4, 3, rng);
  const Matrix y = GdnAnalyze(x, p).output;
  for (int n = 0; n < 3; ++n) {
    for (int i = 0; i < 4; ++i) {
      double vi = 0.0, d = p.beta(i);
      for (int k = 0; k < 4; ++k) vi += p.filters(i, k) * x(k, n);
      for (int j = 0; j < 4; ++j) {
        double vj = 0.0;
        for (int k = 0; k < 4; ++k) vj += p.filters(j, k) * x(k, n);
        d += p.gamma(i, j) * std::pow(std::abs(vj), p.alpha(i, j));
      }
      EXPECT_NEAR(y(i, n), vi / std::pow(d, p.epsilon(i)), 1e-13);
    }
  }
}

TEST(GdnAnalyzeTest, HomogeneousLinearStage) {
  Rng rng(4);
  const GdnParams p = RandomGdnParams(4, rng, false);
  const Matrix x = RandomMatrix(4, 2, rng);
  const GdnForward a = GdnAnalyze(x, p);
  const GdnForward b = GdnAnalyze(3.0 * x, p);
  EXPECT_LT((b.cache.linear - 3.0 * a.cache.linear).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(GdnAnalyzeTest, NonFiniteIsNumericError) {
  GdnParams p = Identity(2);
  Matrix x(2, 2);
  x << 1.0, 2.0, 3.0, std::numeric_limits<double>::infinity();
  try {
    GdnAnalyze(x, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("block 1"), std::string::npos) << e.what();
  }
}

TEST(GdnSynthesizeTest, NoPoolingIsLinear) {
  Rng rng(5);
  GdnParams p = RandomGdnParams(4, rng, false);
  p.gamma.setZero();
  p.beta.setOnes();
  const Matrix y = RandomMatrix(4, 3, rng);
  EXPECT_LT((GdnSynthesize(y, p).output - p.filters * y).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GdnSynthesizeTest, TwoDimensionalExample) {
  GdnParams p = Identity(2);
  p.gamma = Matrix::Identity(2, 2);
  Matrix yh(2, 1);
  yh << 3.0 / std::sqrt(10.0), 4.0 / std::sqrt(17.0);
  const Matrix w = GdnSynthesize(yh, p).output;
  EXPECT_NEAR(w(0), 3.0 / std::sqrt(10.0) * std::sqrt(1.0 + 9.0 / 10.0), 1e-15);
  EXPECT_NEAR(w(1), 4.0 / std::sqrt(17.0) * std::sqrt(1.0 + 16.0 / 17.0), 1e-15);
}

TEST(GdnSynthesizeTest, ExactInverseWithoutPooling) {
  Rng rng(6);
  GdnParams phi = RandomGdnParams(9, rng, false);
  phi.gamma.setZero();
  phi.filters += 3.0 * Matrix::Identity(9, 9);  // well conditioned
  GdnParams theta = phi;
  theta.filters = phi.filters.inverse();
  const Matrix x = RandomMatrix(9, 4, rng);
  const Matrix back = GdnSynthesize(GdnAnalyze(x, phi).output, theta).output;
  EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GdnVjpTest, LinearCaseIsTranspose) {
  Rng rng(7);
  GdnParams p = RandomGdnParams(4, rng, false);
  p.gamma.setZero();
  p.beta.setOnes();
  const Matrix x = RandomMatrix(4, 3, rng);
  const Matrix ybar = RandomMatrix(4, 3, rng);
  const GdnGradients a = GdnAnalyzeVjp(GdnAnalyze(x, p).cache, p, ybar);
  EXPECT_LT((a.input - p.filters.transpose() * ybar).cwiseAbs().maxCoeff(), 1e-14);
  const GdnGradients s = GdnSynthesizeVjp(GdnSynthesize(x, p).cache, p, ybar);
  EXPECT_LT((s.input - p.filters.transpose() * ybar).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GdnVjpTest, ZeroCotangentGivesZeroGradients) {
  Rng rng(8);
  const GdnParams p = RandomGdnParams(4, rng, true);
  const Matrix x = RandomMatrix(4, 2, rng);
  const Matrix zero = Matrix::Zero(4, 2);
  for (bool synth : {false, true}) {
    const GdnForward f = synth ? GdnSynthesize(x, p) : GdnAnalyze(x, p);
    const GdnGradients g = synth ? GdnSynthesizeVjp(f.cache, p, zero, GradRequest::All())
                                 : GdnAnalyzeVjp(f.cache, p, zero, GradRequest::All());
    EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.params.filters.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.params.beta.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.params.gamma.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.params.alpha.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.params.epsilon.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(GdnVjpTest, UnrequestedGradientsAreZero) {
  Rng rng(9);
  const GdnParams p = RandomGdnParams(4, rng, false);
  const Matrix x = RandomMatrix(4, 2, rng);
  const GdnGradients g = GdnAnalyzeVjp(GdnAnalyze(x, p).cache, p, RandomMatrix(4, 2, rng),
                                       GradRequest::For(TransformKind::kLinear, false));
  EXPECT_GT(g.params.filters.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.params.gamma.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.params.beta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GdnVjpTest, AnalysisMatchesFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = trial % 2 ? 4 : 9;
    const bool free_alpha = trial % 3 == 0;
    const GdnParams p = RandomGdnParams(d, rng, free_alpha);
    const Matrix x = RandomMatrix(d, 3, rng);
    const Matrix ybar = RandomMatrix(d, 3, rng);
    EXPECT_LT(GdnVjpError(false, x, p, ybar, GradRequest::All()), 1e-5) << trial;
  }
}

TEST(GdnVjpTest, SynthesisMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = trial % 2 ? 4 : 9;
    const bool free_alpha = trial % 3 == 0;
    const GdnParams p = RandomGdnParams(d, rng, free_alpha);
    const Matrix y = RandomMatrix(d, 3, rng, -2, 2);
    const Matrix xbar = RandomMatrix(d, 3, rng);
    EXPECT_LT(GdnVjpError(true, y, p, xbar, GradRequest::All()), 1e-5) << trial;
  }
}

TEST(InitParamsTest, OrthonormalAndInverse) {
  Rng rng(12);
  const TransformParams t = InitParams(TransformKind::kGdn, 4, rng, 2.0);
  const int d = 16;
  EXPECT_LT((t.analysis.filters * t.analysis.filters.transpose() -
             4.0 * Matrix::Identity(d, d))
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
  EXPECT_LT((t.synthesis.filters * t.analysis.filters - Matrix::Identity(d, d))
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
  EXPECT_EQ(t.analysis.beta, Vector::Ones(d));
  EXPECT_EQ(t.analysis.alpha, Matrix::Constant(d, d, 2.0));
  EXPECT_EQ(t.analysis.epsilon, Vector::Constant(d, 0.5));
  EXPECT_EQ(t.analysis.gamma, Matrix::Constant(d, d, 1e-3));
  ValidateParams(t.analysis);
  ValidateParams(t.synthesis);
}

TEST(InitParamsTest, LinearHasNoPooling) {
  Rng rng(13);
  const TransformParams t = InitParams(TransformKind::kLinear, 4, rng);
  EXPECT_EQ(t.analysis.gamma.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.synthesis.gamma.cwiseAbs().maxCoeff(), 0.0);
  const GradRequest req = GradRequest::For(TransformKind::kLinear, true);
  EXPECT_TRUE(req.filters);
  EXPECT_FALSE(req.gamma);
  EXPECT_FALSE(req.beta);
}

TEST(InitParamsTest, Deterministic) {
  Rng a(14), b(14);
  EXPECT_EQ(InitParams(TransformKind::kGdn, 4, a), InitParams(TransformKind::kGdn, 4, b));
}

TEST(ValidateParamsTest, RejectsInfeasible) {
  GdnParams p = Identity(2);
  ValidateParams(p);
  p.beta(0) = 0.0;
  EXPECT_THROW(ValidateParams(p), Error);
  p = Identity(2);
  p.gamma(0, 1) = -1e-3;
  EXPECT_THROW(ValidateParams(p), Error);
  p = Identity(2);
  p.alpha(1, 1) = 0.5;
  EXPECT_THROW(ValidateParams(p), Error);
  p = Identity(2);
  p.epsilon(0) = 1.5;
  EXPECT_THROW(ValidateParams(p), Error);
}

TEST(TransformKindTest, NamesRoundTrip) {
  EXPECT_EQ(ParseTransformKind(TransformKindName(TransformKind::kLinear)),
            TransformKind::kLinear);
  EXPECT_EQ(ParseTransformKind("gdn"), TransformKind::kGdn);
  EXPECT_THROW(ParseTransformKind("dct"), Error);
}

}  // namespace
}  // namespace ntc
