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

#include <algorithm>
#include <cmath>

#include "steinest/expfam.h"
#include "steinest/robust.h"
#include "steinest/sampling.h"
#include "test_util.h"

namespace steinest {
namespace {

Vector Vec(std::initializer_list<double> v) {
  Vector t(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) t(i++) = x;
  return t;
}

Sample WithCopies(const Sample& s, const Vector& z, Index copies) {
  Sample out(s.size() + copies, s.dim());
  for (Index i = 0; i < s.size(); ++i) out.mutable_point(i) = s.point(i);
  for (Index i = 0; i < copies; ++i) out.mutable_point(s.size() + i) = z;
  return out;
}

TEST(InfluenceTest, ScoreMatchingIsLinearInZ) {
  const ModelPtr model = BuiltinModel("gaussian_location");
  const Sample s = SampleFrom("gaussian_location", Vec({0.2}), 300, 4);
  InfluenceInputs in;
  in.kind = InfluenceKind::kSm;
  in.model = model;
  in.theta = Vec({0.2});
  in.sample = &s;
  std::vector<Vector> zs;
  for (double z : {-30.0, -1.0, 0.0, 2.5, 100.0}) zs.push_back(Vec({z}));
  const std::vector<InfluenceRow> rows = InfluenceCurve(in, zs);
  const double slope = (rows[4].value(0) - rows[0].value(0)) / 130.0;
  for (const InfluenceRow& r : rows) {
    ASSERT_TRUE(r.ok);
    EXPECT_NEAR(r.value(0), rows[2].value(0) + slope * r.z(0), 1e-9 * (1 + std::abs(r.value(0))));
  }
  // The score-matching fit is the mean, whose influence is z - theta.
  EXPECT_NEAR(slope, 1.0, 1e-6);
  EXPECT_NEAR(rows[2].value(0), -0.2, 1e-6);
}

TEST(InfluenceTest, MatchesContaminatedRefit) {
  // Closed-form refits under 2% contamination at z, gaussian_natural family.
  const ExpFamPtr spec = BuiltinExpFam("gaussian_natural");
  const ModelPtr model = ExpFamModel(spec);
  const Sample s = SampleFrom("gaussian_meancov", Vec({0.0, 1.0}), 980, 12);
  const Index copies = 20;
  const double eps = copies / static_cast<double>(s.size() + copies);
  const MatrixKernel k = MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0));
  for (const char* mid : {"identity", "decay"}) {
    const DiffusionPtr m = BuiltinDiffusion(mid);
    for (double zv : {-1.5, 0.7, 2.0}) {
      SCOPED_TRACE(std::string(mid) + " z=" + std::to_string(zv));
      const Vector z = Vec({zv});
      const Sample c = WithCopies(s, z, copies);

      const Vector ds_hat = SolveQuadratic(DsmQuadratic(*spec, *m, s));
      const Vector ds_shift = (SolveQuadratic(DsmQuadratic(*spec, *m, c)) - ds_hat) / eps;
      const Vector ds_if = InfluenceDsm(*model, *m, ds_hat, s, z, 0.0);
      EXPECT_GT(ds_if.dot(ds_shift) / (ds_if.norm() * ds_shift.norm()), 0.9);
      EXPECT_LT(std::abs(ds_if.norm() / ds_shift.norm() - 1.0), 0.3);

      const Vector dk_hat = SolveQuadratic(DksdQuadratic(*spec, k, *m, s));
      const Vector dk_shift = (SolveQuadratic(DksdQuadratic(*spec, k, *m, c)) - dk_hat) / eps;
      const Vector dk_if = InfluenceDksd(SteinKernelCtx(model, k, m, dk_hat, s), z, 0.0);
      EXPECT_GT(dk_if.dot(dk_shift) / (dk_if.norm() * dk_shift.norm()), 0.9);
      EXPECT_LT(std::abs(dk_if.norm() / dk_shift.norm() - 1.0), 0.3);
    }
  }
}

TEST(InfluenceTest, DksdGaussianKernelDecays) {
  const ModelPtr model = BuiltinModel("gaussian_meancov");
  const Vector theta = Vec({0.0, 1.0});
  const Sample s = SampleFrom("gaussian_meancov", theta, 300, 5);
  SteinKernelCtx ctx(model, MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0)),
                     BuiltinDiffusion("identity"), theta, s);
  InfluenceInputs in;
  in.kind = InfluenceKind::kDksd;
  in.ctx = &ctx;
  std::vector<Vector> zs;
  for (double z : {5.0, 10.0, 20.0, 50.0}) zs.push_back(Vec({z}));
  const std::vector<InfluenceRow> rows = InfluenceCurve(in, zs);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].norm, rows[i - 1].norm);
  EXPECT_LT(rows.back().norm, 1e-100);
}

TEST(InfluenceTest, DecayDiffusionBoundsDsm) {
  const ModelPtr model = BuiltinModel("gaussian_meancov");
  const Vector theta = Vec({0.0, 1.0});
  const Sample s = SampleFrom("gaussian_meancov", theta, 500, 6);
  std::vector<Vector> zs;
  for (double z : {1.0, 10.0, 100.0, 1000.0, 1e5}) zs.push_back(Vec({z}));
  InfluenceInputs in;
  in.kind = InfluenceKind::kDsm;
  in.model = model;
  in.m = BuiltinDiffusion("decay", {{"alpha", 2}});
  in.theta = theta;
  in.sample = &s;
  const std::vector<InfluenceRow> bounded = InfluenceCurve(in, zs);
  in.kind = InfluenceKind::kSm;
  const std::vector<InfluenceRow> sm = InfluenceCurve(in, zs);
  double top = 0.0;
  for (const InfluenceRow& r : bounded) top = std::max(top, r.norm);
  EXPECT_LT(bounded.back().norm, 2.0 * bounded[2].norm + 1e-12);
  EXPECT_LT(top, 100.0);
  EXPECT_GT(sm.back().norm, 1e8);
}

TEST(InfluenceTest, CsvAndFreeSubset) {
  const ModelPtr model = BuiltinModel("gaussian_meancov");
  const Vector theta = Vec({0.0, 1.0});
  const Sample s = SampleFrom("gaussian_meancov", theta, 100, 7);
  InfluenceInputs in;
  in.model = model;
  in.m = BuiltinDiffusion("identity");
  in.theta = theta;
  in.sample = &s;
  in.free = {0};
  const std::vector<InfluenceRow> rows = InfluenceCurve(in, {Vec({1.0})});
  ASSERT_EQ(rows[0].value.size(), 1);
  const std::string csv = InfluenceCsv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "z_0,if_0,if_norm");
}

TEST(SamplingTest, MomentsMatch) {
  struct Case {
    std::string name;
    Vector theta;
    Hyper hyper;
    double mean, var;
  };
  const std::vector<Case> cases = {
      {"gaussian_location", Vec({1.5}), {}, 1.5, 0.5},
      {"gaussian_meancov", Vec({-1.0, 2.0}), {}, -1.0, 4.0},
      {"laplace", Vec({0.5, 2.0}), {}, 0.5, 8.0},
      {"student_t", Vec({3.0, 2.0}), {{"nu", 5}}, 3.0, 4.0 * 5.0 / 3.0},
      {"symmetric_bessel", Vec({0.0, 1.5}), {{"s", 3}}, 0.0, 2.25 * 2 * 3},
      {"generalized_gamma", Vec({1.0, 2.0}), {}, 1.0, 0.5},
  };
  const Index n = 200000;
  for (const Case& c : cases) {
    SCOPED_TRACE(c.name);
    const Sample s = SampleFrom(c.name, c.theta, n, 3, c.hyper);
    double sum = 0.0, sum2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      sum += s.point(i)(0);
      sum2 += s.point(i)(0) * s.point(i)(0);
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    EXPECT_NEAR(mean, c.mean, 5.0 * std::sqrt(c.var / n));
    EXPECT_LT(std::abs(var / c.var - 1.0), 0.03);
  }
}

TEST(SamplingTest, StudentKurtosis) {
  // Excess kurtosis of t_nu is 6 / (nu - 4).
  const Index n = 400000;
  const Sample s = SampleFrom("student_t", Vec({0.0, 1.0}), n, 8, {{"nu", 10}});
  double m2 = 0.0, m4 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double x2 = s.point(i)(0) * s.point(i)(0);
    m2 += x2;
    m4 += x2 * x2;
  }
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m4 / (m2 * m2) - 3.0, 1.0, 0.25);
}

TEST(SamplingTest, BesselOrderOneIsLaplace) {
  // Normal scale mixture with exponential variance of mean 2: Laplace(0, 1).
  const Index n = 20000;
  const Sample s = SampleFrom("symmetric_bessel", Vec({0.0, 1.0}), n, 9, {{"s", 1}});
  std::vector<double> xs(n);
  for (Index i = 0; i < n; ++i) xs[i] = s.point(i)(0);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double x = xs[i];
    const double cdf = x < 0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
    ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - (i + 1.0) / n)});
  }
  EXPECT_LT(ks, 1.63 / std::sqrt(static_cast<double>(n)));  // 1% level
}

TEST(SamplingTest, IntractableDrawsFollowDensity) {
  // Check E[score] = 0 and E[laplacian + ||score||^2] = 0 (Stein identities).
  const ModelPtr model = BuiltinModel("intractable_expfam");
  const Vector theta = Vec({-1.0});
  const Index n = 100000;
  const Sample s = SampleFrom("intractable_expfam", theta, n, 10);
  Vector mean_score = Vector::Zero(6);
  double stein = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector sc = model->Score(s.point(i), theta);
    mean_score += sc;
    stein += model->Hessian(s.point(i), theta).trace() + sc.squaredNorm();
  }
  mean_score /= n;
  stein /= n;
  EXPECT_LT(mean_score.cwiseAbs().maxCoeff(), 0.02);
  EXPECT_NEAR(stein, 0.0, 0.06);
}

TEST(SamplingTest, DeterministicAndStreamed) {
  const Sample a = SampleFrom("laplace", Vec({0.0, 0.0, 1.0}), 50, 1, {{"d", 2}});
  const Sample b = SampleFrom("laplace", Vec({0.0, 0.0, 1.0}), 50, 1, {{"d", 2}});
  const Sample c = SampleFrom("laplace", Vec({0.0, 0.0, 1.0}), 50, 1, {{"d", 2}}, 1);
  EXPECT_TRUE(a.data() == b.data());
  EXPECT_FALSE(a.data() == c.data());
  EXPECT_THROW(SampleFrom("nope", Vec({0.0}), 5, 1), ConfigError);
  EXPECT_THROW(SampleFrom("student_t", Vec({0.0}), 5, 1), ConfigError);
}

TEST(SamplingTest, CorruptionIsExact) {
  const Sample s = SampleFrom("gaussian_meancov", Vec({0.0, 1.0}), 200, 2);
  const Vector value = Vec({25.0});
  const Sample c = Corrupt(s, 13, value, 4);
  Index hits = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (c.point(i) == value) {
      ++hits;
    } else {
      EXPECT_TRUE(c.point(i) == s.point(i));
    }
  }
  EXPECT_EQ(hits, 13);
  EXPECT_THROW(Corrupt(s, 201, value, 4), ConfigError);
  EXPECT_TRUE(Corrupt(s, 0, value, 4).data() == s.data());
}

}  // namespace
}  // namespace steinest
