// Copyright 2026 The steinest Authors.
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

#include <gtest/gtest.h>

#include <cmath>

#include "steinest/estimators.h"
#include "steinest/sampling.h"
#include "steinest/stein_kernel.h"
#include "test_util.h"

namespace steinest {
namespace {

using testing::RandomVector;

Vector Theta(std::initializer_list<double> v) {
  Vector t(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) t(i++) = x;
  return t;
}

double NaiveDksd(const SteinKernelCtx& ctx) {
  const Index n = ctx.sample().size();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j) acc += SteinKernel(ctx, ctx.sample().point(i), ctx.sample().point(j));
    }
  }
  return acc / (static_cast<double>(n) * (n - 1));
}

TEST(DksdTest, TwoPointsIsSinglePair) {
  Rng rng(1);
  const Sample s = testing::RandomSample(2, 1, &rng);
  SteinKernelCtx ctx(BuiltinModel("student_t"), MatrixKernel::ScaledIdentity(1, ImqKernel(1, -0.5)),
                     BuiltinDiffusion("student_loc"), Theta({0.2, 1.1}), s);
  EXPECT_NEAR(DksdLoss(ctx), SteinKernel(ctx, s.point(0), s.point(1)), 1e-15);
}

TEST(DksdTest, MatchesNaiveDoubleSum) {
  Rng rng(2);
  struct Case {
    ModelPtr model;
    MatrixKernel k;
    DiffusionPtr m;
    Vector theta;
    Index n;
  };
  Vector lambda(2);
  lambda << 1.0, 2.5;
  const std::vector<Case> cases = {
      {BuiltinModel("student_t"), MatrixKernel::ScaledIdentity(1, ImqKernel(1, -0.5)),
       BuiltinDiffusion("student_loc"), Theta({0.3, 1.5}), 20},
      {BuiltinModel("gaussian_meancov", {{"d", 2}}),
       MatrixKernel::Diagonal(lambda, {GaussianKernel(1.0), GaussianKernel(0.5)}),
       BuiltinDiffusion("decay"), Theta({0.1, -0.3, 1.2}), 50},
      {BuiltinModel("intractable_expfam"), MatrixKernel::ScaledIdentity(6, GaussianKernel(1.0)),
       BuiltinDiffusion("recip_diag"), Theta({-1.0}), 37},
  };
  for (const Case& c : cases) {
    Sample s = testing::RandomSample(c.n, c.model->dim_x(), &rng, 0.3);
    SteinKernelCtx ctx(c.model, c.k, c.m, c.theta, s);
    const double want = NaiveDksd(ctx);
    EXPECT_LE(std::abs(DksdLoss(ctx) - want), 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(DksdTest, NearZeroAtTruth) {
  // Standard normal at the truth; the jackknife-style standard error uses
  // the Hoeffding projection 2 sd(row means) / sqrt(n).
  const ModelPtr model = BuiltinModel("gaussian_meancov");
  const Vector theta = Theta({0.0, 1.0});
  const Sample s = SampleFrom("gaussian_meancov", theta, 2000, 7);
  SteinKernelCtx ctx(model, MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0)),
                     BuiltinDiffusion("identity"), theta, s, false);
  const double loss = DksdLoss(ctx);
  const Index n = s.size();
  Vector rows(n);
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j != i) acc += SteinKernel(ctx, s.point(i), s.point(j));
    }
    rows(i) = acc / (n - 1);
  }
  const double sd = std::sqrt((rows.array() - rows.mean()).square().sum() / (n - 1));
  const double se = 2.0 * sd / std::sqrt(static_cast<double>(n));
  EXPECT_LT(std::abs(loss), 3.0 * se + 1e-4) << "loss " << loss << " se " << se;
}

TEST(DksdTest, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  const ModelPtr model = BuiltinModel("student_t", {{"nu", 5}});
  const MatrixKernel k = MatrixKernel::ScaledIdentity(1, ImqKernel(1, -0.5));
  for (const char* mid : {"identity", "student_loc", "student_scale", "decay"}) {
    const DiffusionPtr m = BuiltinDiffusion(mid);
    for (int t = 0; t < 25; ++t) {
      const Vector theta = Theta({testing::Uniform(&rng, -1, 1), testing::Uniform(&rng, 0.7, 2)});
      Sample s = testing::RandomSample(25, 1, &rng, 2.0);
      SteinKernelCtx ctx(model, k, m, theta, s);
      const Vector grad = DksdGrad(ctx);
      const Vector fd = testing::FdGradient(
          [&](const Vector& th) { return DksdLoss(SteinKernelCtx(model, k, m, th, s, false)); }, theta);
      EXPECT_LT((grad - fd).norm() / (1e-8 + fd.norm()), 1e-5) << mid;
      const LossReport r = DksdEvaluate(ctx, kWantValue | kWantGrad | kWantInfo);
      EXPECT_DOUBLE_EQ(r.value, DksdLoss(ctx));
      EXPECT_LT((*r.grad - grad).norm(), 1e-13 * (1 + grad.norm()));
    }
  }
}

TEST(DksdTest, InfoMatrixSymmetricPsd) {
  Rng rng(4);
  const ModelPtr model = BuiltinModel("gaussian_meancov", {{"d", 2}});
  const Vector theta = Theta({0.2, -0.1, 1.3});
  const Sample s = SampleFrom("gaussian_meancov", theta, 200, 3, {{"d", 2}});
  SteinKernelCtx ctx(model, MatrixKernel::ScaledIdentity(2, GaussianKernel(1.0)),
                     BuiltinDiffusion("identity"), theta, s);
  const Matrix g = DksdInfoMatrix(ctx);
  EXPECT_LT((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues().minCoeff(),
            -1e-8 * g.trace() / 3);
}

TEST(DksdTest, InfoMatrixMatchesQuadrature) {
  // Gaussian location d = 1: the metric integrand is 4 k(x, y) under
  // P = N(theta, 1/2). Trapezoid quadrature of the double integral.
  const Vector theta = Theta({0.3});
  const double sd = std::sqrt(0.5);
  const int grid = 401;
  const double lo = theta(0) - 8 * sd, hi = theta(0) + 8 * sd;
  const double h = (hi - lo) / (grid - 1);
  double quad = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = lo + i * h;
    const double px = std::exp(-std::pow(x - theta(0), 2) / (2 * 0.5)) / (sd * std::sqrt(2 * M_PI));
    for (int j = 0; j < grid; ++j) {
      const double y = lo + j * h;
      const double py = std::exp(-std::pow(y - theta(0), 2) / (2 * 0.5)) / (sd * std::sqrt(2 * M_PI));
      quad += px * py * 4.0 * std::exp(-0.5 * (x - y) * (x - y));
    }
  }
  quad *= h * h;
  const Sample s = SampleFrom("gaussian_location", theta, 5000, 11);
  SteinKernelCtx ctx(BuiltinModel("gaussian_location"),
                     MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0)), BuiltinDiffusion("identity"),
                     theta, s);
  const double g = DksdInfoMatrix(ctx)(0, 0);
  EXPECT_NEAR(quad, 4.0 / std::sqrt(2.0), 1e-8);
  EXPECT_LT(std::abs(g - quad) / quad, 0.05);
}

TEST(DksdTest, AddedConstantIsInvisible) {
  Rng rng(5);
  const ModelPtr model = BuiltinModel("student_t", {{"nu", 5}});
  const ModelPtr shifted = ShiftedModel(model, -42.0);
  const Sample s = testing::RandomSample(30, 1, &rng, 2.0);
  const Vector theta = Theta({0.1, 1.4});
  const MatrixKernel k = MatrixKernel::ScaledIdentity(1, ImqKernel(1, -0.5));
  const DiffusionPtr m = BuiltinDiffusion("student_loc");
  const unsigned all = kWantValue | kWantGrad | kWantInfo;
  const LossReport a = DksdEvaluate(SteinKernelCtx(model, k, m, theta, s), all);
  const LossReport b = DksdEvaluate(SteinKernelCtx(shifted, k, m, theta, s), all);
  EXPECT_EQ(a.value, b.value);
  EXPECT_TRUE(*a.grad == *b.grad);
  EXPECT_TRUE(*a.info == *b.info);
  const DiffusionPtr decay = BuiltinDiffusion("decay");
  const LossReport c = DsmEvaluate(*model, *decay, theta, s, all);
  const LossReport d = DsmEvaluate(*shifted, *decay, theta, s, all);
  EXPECT_EQ(c.value, d.value);
  EXPECT_TRUE(*c.grad == *d.grad);
  EXPECT_TRUE(*c.info == *d.info);
}

TEST(DksdTest, KernelScalingScalesLossAndKeepsArgmin) {
  Rng rng(6);
  const ModelPtr model = BuiltinModel("student_t", {{"nu", 5}});
  const Sample s = SampleFrom("student_t", Theta({0.0, 1.0}), 100, 9);
  const MatrixKernel k = MatrixKernel::ScaledIdentity(1, ImqKernel(1, -0.5));
  const MatrixKernel k3 = k.Scale(3.0);
  const DiffusionPtr m = BuiltinDiffusion("identity");
  int best = -1, best3 = -1;
  double lbest = 1e300, lbest3 = 1e300;
  for (int i = 0; i < 41; ++i) {
    const Vector theta = Theta({-1.0 + 0.05 * i, 1.0});
    const double l = DksdLoss(SteinKernelCtx(model, k, m, theta, s, false));
    const double l3 = DksdLoss(SteinKernelCtx(model, k3, m, theta, s, false));
    EXPECT_NEAR(l3, 3.0 * l, 1e-12 * std::abs(l3) + 1e-15);
    if (l < lbest) lbest = l, best = i;
    if (l3 < lbest3) lbest3 = l3, best3 = i;
  }
  EXPECT_EQ(best, best3);
}

TEST(DksdTest, IdentityDiffusionIsClassicalUStatistic) {
  Rng rng(7);
  const ModelPtr model = BuiltinModel("laplace", {{"d", 2}});
  const Vector theta = Theta({0.3, -0.3, 1.2});
  const Sample s = testing::RandomSample(30, 2, &rng, 2.0);
  const ScalarKernelPtr k = GaussianKernel(1.3);
  SteinKernelCtx ctx(model, MatrixKernel::ScaledIdentity(2, k), BuiltinDiffusion("identity"), theta, s,
                     false);
  double acc = 0.0;
  const Index n = s.size();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Vector x = s.point(i), y = s.point(j);
      const Vector sx = model->Score(x, theta), sy = model->Score(y, theta);
      acc += sx.dot(sy) * k->Eval(x, y) + sx.dot(k->GradY(x, y)) + sy.dot(k->GradX(x, y)) +
             k->GradXY(x, y).trace();
    }
  }
  const double want = acc / (n * (n - 1.0));
  EXPECT_LE(std::abs(DksdLoss(ctx) - want), 1e-12 * std::max(1.0, std::abs(want)));
}

TEST(DksdTest, NeedsTwoPoints) {
  Rng rng(8);
  SteinKernelCtx ctx(BuiltinModel("gaussian_location"),
                     MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0)), BuiltinDiffusion("identity"),
                     Theta({0.0}), testing::RandomSample(1, 1, &rng));
  EXPECT_THROW(DksdLoss(ctx), ConfigError);
}

TEST(DsmTest, HandExample) {
  Sample s(1, 1);
  s.mutable_point(0)(0) = 0.0;
  EXPECT_DOUBLE_EQ(DsmLoss(*BuiltinModel("gaussian_location"), *BuiltinDiffusion("identity"),
                           Theta({0.0}), s),
                   -4.0);
}

TEST(DsmTest, IdentityIsTwiceScoreMatching) {
  Rng rng(9);
  for (const char* id : {"gaussian_meancov", "student_t", "laplace"}) {
    const ModelPtr model = BuiltinModel(id, {{"d", 2}});
    const Vector theta = testing::RandomTheta(*model, &rng);
    const Sample s = testing::RandomSample(40, 2, &rng, 2.0);
    const double dsm = DsmLoss(*model, *BuiltinDiffusion("identity"), theta, s);
    EXPECT_LE(std::abs(dsm - 2.0 * SmLoss(*model, theta, s)), 1e-12 * std::max(1.0, std::abs(dsm)));
  }
}

TEST(DsmTest, NonNegativeDiffusionIsGeneralizedScoreMatching) {
  // Generalized SM with h_i(x_i) = x_i^2, written out directly:
  //   sum_i h_i s_i^2 / 2 + h_i' s_i + h_i H_ii.
  Rng rng(10);
  const ModelPtr model = BuiltinModel("gaussian_meancov", {{"d", 2}});
  const Vector theta = Theta({1.0, 2.0, 0.8});
  Sample s = testing::RandomSample(50, 2, &rng);
  for (Index i = 0; i < s.size(); ++i) s.mutable_point(i) = s.point(i).cwiseAbs();
  double acc = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    const Vector x = s.point(i);
    const Vector sc = model->Score(x, theta);
    const Matrix h = model->Hessian(x, theta);
    for (int r = 0; r < 2; ++r) {
      acc += 0.5 * x(r) * x(r) * sc(r) * sc(r) + 2.0 * x(r) * sc(r) + x(r) * x(r) * h(r, r);
    }
  }
  const double lyu = acc / s.size();
  const double dsm = DsmLoss(*model, *BuiltinDiffusion("nonneg"), theta, s);
  EXPECT_LE(std::abs(dsm - 2.0 * lyu), 1e-12 * std::max(1.0, std::abs(dsm)));
}

TEST(DsmTest, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  const ModelPtr model = BuiltinModel("generalized_gamma");
  for (const char* mid : {"identity", "decay"}) {
    const DiffusionPtr m = BuiltinDiffusion(mid);
    for (int t = 0; t < 50; ++t) {
      const Vector theta = Theta({testing::Uniform(&rng, -0.5, 0.5), testing::Uniform(&rng, 1.5, 3.0)});
      // Points next to the center sit on the kink where finite differences
      // straddle a singular derivative; keep them out of the sample.
      const Sample raw = SampleFrom("generalized_gamma", theta, 40, 100 + t);
      std::vector<double> kept;
      for (Index i = 0; i < raw.size(); ++i) {
        if (std::abs(raw.point(i)(0) - theta(0)) > 0.05) kept.push_back(raw.point(i)(0));
      }
      Sample s(static_cast<Index>(kept.size()), 1);
      for (Index i = 0; i < s.size(); ++i) s.mutable_point(i)(0) = kept[i];
      const Vector grad = DsmGrad(*model, *m, theta, s);
      const Vector fd = testing::FdGradient(
          [&](const Vector& th) { return DsmLoss(*model, *m, th, s); }, theta, 1e-6);
      EXPECT_LT((grad - fd).norm() / (1e-8 + fd.norm()), 1e-5) << mid;
    }
  }
}

TEST(DsmTest, InfoMatrixGaussianLocation) {
  Rng rng(12);
  const Sample s = testing::RandomSample(25, 1, &rng);
  const Matrix g = DsmInfoMatrix(*BuiltinModel("gaussian_location"), *BuiltinDiffusion("identity"),
                                 Theta({0.4}), s);
  EXPECT_DOUBLE_EQ(g(0, 0), 4.0);
}

TEST(DsmTest, InfoMatrixMatchesQuadrature) {
  // Student-t location/scale with decay m: the metric integrand is
  // m(x)^2 (d/dtheta score)(d/dtheta score)^T. Trapezoid rule under the
  // model density, normalized numerically.
  const ModelPtr model = BuiltinModel("student_t", {{"nu", 5}});
  const DiffusionPtr m = BuiltinDiffusion("decay");
  const Vector theta = Theta({0.5, 1.5});
  const int grid = 20001;
  const double lo = -200, hi = 200, h = (hi - lo) / (grid - 1);
  Matrix acc = Matrix::Zero(2, 2);
  double mass = 0.0;
  for (int i = 0; i < grid; ++i) {
    Vector x(1);
    x << lo + i * h;
    const double p = std::exp(model->LogDensity(x, theta));
    const double mx = m->Eval(x, theta)(0, 0);
    const Matrix w = mx * model->GradThetaScore(x, theta);
    acc += p * w * w.transpose();
    mass += p;
  }
  acc /= mass;
  const Sample s = SampleFrom("student_t", theta, 20000, 13, {{"nu", 5}});
  const Matrix g = DsmInfoMatrix(*model, *m, theta, s);
  EXPECT_LT((g - acc).norm() / acc.norm(), 0.05) << g << "\n" << acc;
}

TEST(DsmTest, RejectsThetaDependentDiffusion) {
  Rng rng(13);
  const Sample s = testing::RandomSample(10, 1, &rng);
  EXPECT_THROW(DsmLoss(*BuiltinModel("student_t"), *BuiltinDiffusion("student_loc"), Theta({0, 1}), s),
               ConfigError);
}

TEST(SandwichTest, SymmetricPsdAndKernelScaleInvariant) {
  const ModelPtr model = BuiltinModel("gaussian_meancov");
  const Vector theta = Theta({0.0, 1.0});
  const Sample s = SampleFrom("gaussian_meancov", theta, 300, 21);
  const MatrixKernel k = MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0));
  const DiffusionPtr m = BuiltinDiffusion("identity");
  const Matrix a = SandwichCovarianceDksd(SteinKernelCtx(model, k, m, theta, s));
  const Matrix b = SandwichCovarianceDksd(SteinKernelCtx(model, k.Scale(2.0), m, theta, s));
  EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-12 * a.norm());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().minCoeff(), -1e-10 * a.norm());
  EXPECT_LT((a - b).norm() / a.norm(), 1e-5);
  const Matrix c = SandwichCovarianceDsm(*model, *m, theta, s);
  EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12 * c.norm());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(c).eigenvalues().minCoeff(), -1e-10 * c.norm());
  const Matrix sub = SandwichCovarianceDsm(*model, *m, theta, s, kDefaultRidge, {0});
  EXPECT_EQ(sub.rows(), 1);
}

TEST(SandwichTest, DsmGaussianLocationClosedForm) {
  // F = 4 (x - theta)^2 - 4, so grad F = -8 (x - theta), g = 4 and the
  // sandwich is var(8 (x - theta)) / 64 = var(x).
  const Vector theta = Theta({0.0});
  const Sample s = SampleFrom("gaussian_location", theta, 4000, 31);
  const double cov = SandwichCovarianceDsm(*BuiltinModel("gaussian_location"),
                                           *BuiltinDiffusion("identity"), theta, s, 0.0)(0, 0);
  double second = 0.0;
  for (Index i = 0; i < s.size(); ++i) second += std::pow(s.point(i)(0), 2);
  second /= s.size();
  EXPECT_NEAR(cov, second, 1e-10);
}

}  // namespace
}  // namespace steinest
