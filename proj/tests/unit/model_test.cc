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
#include <string>
#include <vector>

#include "steinest/bessel.h"
#include "steinest/model.h"
#include "test_util.h"

namespace steinest {
namespace {

using testing::FdJacobian;
using testing::Flatten;
using testing::RandomTheta;
using testing::RandomVector;
using testing::ScaledErr;

struct ModelCase {
  std::string id;
  Hyper hyper;
};

std::vector<ModelCase> AllCases() {
  return {
      {"gaussian_location", {{"d", 2}}},
      {"gaussian_meancov", {{"d", 2}}},
      {"laplace", {{"d", 3}}},
      {"symmetric_bessel", {{"s", 2}, {"d", 2}}},
      {"symmetric_bessel", {{"s", 1000}}},
      {"student_t", {{"nu", 5}, {"d", 2}}},
      {"generalized_gamma", {}},
      {"intractable_expfam", {}},
  };
}

// Location the density is centred on, if any.
Vector Center(const ModelCase& c, const Model& model, const Vector& theta) {
  const int d = model.dim_x();
  if (c.id == "intractable_expfam") return Vector::Zero(d);
  return theta.head(d);
}

// Random point kept away from the centre so the radial kinks are avoided.
Vector RandomPointNear(const Vector& center, Rng* rng) {
  Vector dir = RandomVector(center.size(), rng);
  dir /= dir.norm();
  return center + testing::Uniform(rng, 0.3, 3.0) * dir;
}

TEST(ModelTest, GaussianLocationScoreExample) {
  const ModelPtr m = BuiltinModel("gaussian_location");
  Vector x(1), theta(1);
  x << 1.0;
  theta << 0.0;
  EXPECT_DOUBLE_EQ(m->Score(x, theta)(0), -2.0);
}

TEST(ModelTest, StudentScoreVanishesAtLocation) {
  const ModelPtr m = BuiltinModel("student_t", {{"nu", 5}});
  Vector x(1), theta(2);
  x << 25.0;
  theta << 25.0, 10.0;
  EXPECT_EQ(m->Score(x, theta)(0), 0.0);
}

TEST(ModelTest, BesselWithUnitShapeIsLaplace) {
  const ModelPtr m = BuiltinModel("symmetric_bessel", {{"s", 1}});
  Vector theta(2);
  theta << 0.5, 1.7;
  for (double x0 : {0.9, 2.0, 7.5, 30.0}) {
    Vector x(1);
    x << x0;
    EXPECT_NEAR(m->Score(x, theta)(0), -1.0 / 1.7, 1e-10);
    const double h = 1e-5;
    Vector xp = x, xm = x;
    xp(0) += h;
    xm(0) -= h;
    const double fd = (m->LogDensity(xp, theta) - m->LogDensity(xm, theta)) / (2 * h);
    EXPECT_NEAR(fd, -1.0 / 1.7, 1e-7);
  }
}

TEST(ModelTest, DerivativesMatchFiniteDifferences) {
  Rng rng(11);
  for (const ModelCase& c : AllCases()) {
    const ModelPtr model = BuiltinModel(c.id, c.hyper);
    const int d = model->dim_x();
    const int p = model->dim_theta();
    for (int trial = 0; trial < 100; ++trial) {
      const Vector theta = RandomTheta(*model, &rng);
      const Vector x = RandomPointNear(Center(c, *model, theta), &rng);
      SCOPED_TRACE(c.id + " trial " + std::to_string(trial));

      const Vector score = model->Score(x, theta);
      const Matrix fd_score = FdJacobian(
          [&](const Vector& y) { return Vector::Constant(1, model->LogDensity(y, theta)); }, x);
      EXPECT_LT(ScaledErr(score, fd_score.transpose()), 1e-5);

      const Matrix hess = model->Hessian(x, theta);
      EXPECT_LT((hess - hess.transpose()).cwiseAbs().maxCoeff(), 1e-10);
      const Matrix fd_hess = FdJacobian([&](const Vector& y) { return model->Score(y, theta); }, x);
      EXPECT_LT(ScaledErr(hess, fd_hess), 1e-5);

      const Matrix gts = model->GradThetaScore(x, theta);
      ASSERT_EQ(gts.rows(), p);
      ASSERT_EQ(gts.cols(), d);
      const Matrix fd_gts = FdJacobian([&](const Vector& t) { return model->Score(x, t); }, theta);
      EXPECT_LT(ScaledErr(gts, fd_gts.transpose()), 1e-5);

      const std::vector<Matrix> gth = model->GradThetaHess(x, theta);
      ASSERT_EQ(static_cast<int>(gth.size()), p);
      const Matrix fd_gth =
          FdJacobian([&](const Vector& t) { return Flatten(model->Hessian(x, t)); }, theta);
      for (int a = 0; a < p; ++a) {
        EXPECT_LT(ScaledErr(Flatten(gth[a]), fd_gth.col(a)), 1e-5) << "theta coordinate " << a;
      }
    }
  }
}

TEST(ModelTest, FiniteDiffWrapMatchesAnalytic) {
  Rng rng(5);
  {
    const ModelPtr m = BuiltinModel("gaussian_location", {{"d", 2}});
    const ModelPtr w = FiniteDiffWrap(m);
    for (int t = 0; t < 20; ++t) {
      const Vector theta = RandomVector(2, &rng);
      const Vector x = RandomVector(2, &rng, 2.0);
      const Vector want = m->Score(x, theta);
      EXPECT_LT((w->Score(x, theta) - want).norm() / want.norm(), 1e-6);
    }
  }
  const ModelPtr st = BuiltinModel("student_t", {{"nu", 5}});
  const ModelPtr w = FiniteDiffWrap(st);
  Vector x(1), theta(2);
  x << 30.0;
  theta << 25.0, 10.0;
  const double want = st->Hessian(x, theta)(0, 0);
  EXPECT_LT(testing::RelErr(w->Hessian(x, theta)(0, 0), want), 1e-5);
  const Matrix gts = w->GradThetaScore(x, theta);
  EXPECT_LT(ScaledErr(gts, st->GradThetaScore(x, theta)), 1e-5);
}

TEST(ModelTest, FiniteDiffWrapOfConstantDensity) {
  const ModelPtr flat = LogDensityModel(
      "flat", 2, 1, [](const PointRef&, const Vector&) { return 3.25; });
  const ModelPtr w = FiniteDiffWrap(flat);
  Vector x(2), theta(1);
  x << 0.3, -1.2;
  theta << 0.7;
  EXPECT_EQ(w->Score(x, theta).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(w->Hessian(x, theta).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModelTest, AddedConstantLeavesDerivativesBitIdentical) {
  Rng rng(3);
  for (const ModelCase& c : AllCases()) {
    const ModelPtr model = BuiltinModel(c.id, c.hyper);
    const ModelPtr shifted = ShiftedModel(model, 123.456);
    for (int t = 0; t < 10; ++t) {
      const Vector theta = RandomTheta(*model, &rng);
      const Vector x = RandomPointNear(Center(c, *model, theta), &rng);
      ModelPoint a, b;
      model->Evaluate(x, theta, kNeedAll, &a);
      shifted->Evaluate(x, theta, kNeedAll, &b);
      EXPECT_TRUE(a.score == b.score);
      EXPECT_TRUE(a.hess == b.hess);
      EXPECT_TRUE(a.grad_theta_score == b.grad_theta_score);
      for (size_t k = 0; k < a.grad_theta_hess.size(); ++k) {
        EXPECT_TRUE(a.grad_theta_hess[k] == b.grad_theta_hess[k]);
      }
    }
  }
}

TEST(ModelTest, GeneralizedGammaKinkConvention) {
  const ModelPtr m = BuiltinModel("generalized_gamma");
  Vector x(1), theta(2);
  x << 0.4;
  theta << 0.4, 2.0;
  EXPECT_EQ(m->Score(x, theta)(0), 0.0);
}

TEST(ModelTest, RejectsInvalidInput) {
  EXPECT_THROW(BuiltinModel("no_such_model"), ConfigError);
  EXPECT_THROW(BuiltinModel("symmetric_bessel", {{"s", 0.5}}), ConfigError);
  EXPECT_THROW(BuiltinModel("symmetric_bessel", {{"s", 1.0}, {"d", 2}}), ConfigError);
  EXPECT_THROW(BuiltinModel("student_t", {{"nu", 0}}), ConfigError);
  EXPECT_THROW(BuiltinModel("student_t", {{"nu", -2}}), ConfigError);
  const ModelPtr st = BuiltinModel("student_t", {{"nu", 5}});
  Vector bad(2);
  bad << 0.0, -1.0;
  EXPECT_THROW(st->CheckTheta(bad), ConfigError);
  EXPECT_THROW(st->CheckTheta(Vector::Zero(3)), ConfigError);
  Vector nan_theta(2);
  nan_theta << std::nan(""), 1.0;
  EXPECT_THROW(st->CheckTheta(nan_theta), ConfigError);
}

// Reference values of log K_nu(z) from 40-digit arithmetic.
TEST(BesselTest, LogBesselKMatchesReference) {
  struct Row {
    double nu, z, want;
  };
  const Row rows[] = {
      {0, 0.1, 0.8866843666787421268},
      {0.5, 1.0, -0.77420864735527256764},
      {1.5, 2.5, -2.3958817766711371697},
      {0, 10.0, -10.93743282303833292},
      {3.25, 0.7, 3.6011811450760283395},
      {7.5, 12.0, -10.828766069587186235},
      {0.3, 40.0, -41.620623992576896004},
      {1, 0.001, 6.907751517131146853},
      {999.5, 3.0, 5495.8091445825418999},
      {2.0, 9.99, -10.73633082067037725},
      {2.0, 10.01, -10.757670600118296874},
  };
  for (const Row& r : rows) {
    EXPECT_LT(testing::RelErr(LogBesselK(r.nu, r.z), r.want), 1e-10)
        << "nu=" << r.nu << " z=" << r.z;
    EXPECT_LT(testing::RelErr(LogBesselK(-r.nu, r.z), r.want), 1e-10);
  }
}

TEST(BesselTest, RatioMatchesReference) {
  struct Row {
    double nu, z, want;
  };
  const Row rows[] = {
      {0.5, 1.0, 1.0},
      {1.5, 0.2, 0.16666666666666667438},
      {3.0, 5.0, 0.64026676172860789701},
      {999.5, 3.0, 0.0015022499864535464092},
      {-0.7, 2.0, 1.6208313786710810641},
  };
  for (const Row& r : rows) {
    EXPECT_LT(testing::RelErr(BesselKRatio(r.nu, r.z), r.want), 1e-10)
        << "nu=" << r.nu << " z=" << r.z;
  }
}

TEST(BesselTest, HalfOrderClosedForm) {
  // K_{1/2}(z) = sqrt(pi / (2 z)) e^{-z}.
  for (double z : {1e-4, 0.3, 2.0, 9.9, 10.1, 55.0}) {
    const double want = 0.5 * std::log(M_PI / (2 * z)) - z;
    EXPECT_NEAR(LogBesselK(0.5, z), want, 1e-10 * std::max(1.0, std::abs(want)));
  }
}

}  // namespace
}  // namespace steinest
