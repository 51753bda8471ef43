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
#include <cstdlib>

#include "steinest/expfam.h"
#include "steinest/optim.h"
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

ObjectivePtr Quadratic(const Matrix& a, const Vector& v) {
  FunctionObjectiveFns fns;
  fns.value = [a, v](const Vector& t) { return t.dot(a * t) + v.dot(t); };
  fns.grad = [a, v](const Vector& t) -> Vector { return 2.0 * a * t + v; };
  fns.info = [a](const Vector&) -> Matrix { return a; };
  return FunctionObjective(static_cast<int>(v.size()), fns);
}

Sample Dummy() { return Sample(4, 1); }

class ThreadEnv {
 public:
  explicit ThreadEnv(const char* v) {
    if (const char* old = std::getenv("STEIN_ESTIM_THREADS")) old_ = old, had_ = true;
    setenv("STEIN_ESTIM_THREADS", v, 1);
  }
  ~ThreadEnv() {
    if (had_) {
      setenv("STEIN_ESTIM_THREADS", old_.c_str(), 1);
    } else {
      unsetenv("STEIN_ESTIM_THREADS");
    }
  }

 private:
  std::string old_;
  bool had_ = false;
};

TEST(SgdTest, SquaredNormOneStep) {
  OptimConfig cfg;
  cfg.step = 0.5;
  cfg.max_iters = 1;
  const SgdResult r = SgdRun(*Quadratic(Matrix::Identity(2, 2), Vector::Zero(2)), Dummy(),
                             Vec({1.0, -2.0}), cfg);
  EXPECT_TRUE(r.theta.isZero(0.0));
  ASSERT_EQ(r.trajectory.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(r.trajectory.rows[0].loss, 5.0);
  EXPECT_DOUBLE_EQ(r.trajectory.rows[0].grad_norm, std::sqrt(20.0));
}

TEST(SgdTest, IdentityPreconditionerIsBitIdenticalToNone) {
  const Sample s = SampleFrom("student_t", Vec({0.0, 1.0}), 300, 2);
  const ObjectivePtr obj = DksdObjective(BuiltinModel("student_t"),
                                         MatrixKernel::ScaledIdentity(1, ImqKernel(1, -0.5)),
                                         BuiltinDiffusion("student_loc"));
  OptimConfig cfg;
  cfg.step = 0.05;
  cfg.max_iters = 30;
  cfg.batch_size = 40;
  cfg.seed = 9;
  const SgdResult a = SgdRun(*obj, s, Vec({1.0, 2.0}), cfg);
  cfg.preconditioner = Preconditioner::kIdentity;
  const SgdResult b = SgdRun(*obj, s, Vec({1.0, 2.0}), cfg);
  EXPECT_EQ(TrajectoryCsv(a.trajectory), TrajectoryCsv(b.trajectory));
  EXPECT_TRUE(a.theta == b.theta);
}

TEST(SgdTest, NewtonStepReachesClosedForm) {
  Rng rng(3);
  const ExpFamPtr spec = BuiltinExpFam("gaussian_natural", {{"d", 2}});
  const Sample s = testing::RandomSample(400, 2, &rng, 0.7);
  const DiffusionPtr m = BuiltinDiffusion("identity");
  const QuadraticForm q = DsmQuadratic(*spec, *m, s);
  const Vector hat = SolveQuadratic(q);
  // For a quadratic, the loss Hessian is 2 a and the metric is half of it,
  // so gamma = 1/2 with the metric preconditioner is a Newton step.
  const ObjectivePtr obj = DsmObjective(ExpFamModel(spec), m);
  OptimConfig cfg;
  cfg.step = 0.5;
  cfg.max_iters = 1;
  cfg.batch_size = 0;
  cfg.preconditioner = Preconditioner::kInfo;
  cfg.log_space = {false, false, false};
  const SgdResult r = SgdRun(*obj, s, Vec({0.2, 0.1, 1.5}), cfg);
  EXPECT_LT((r.theta - hat).norm(), 1e-6) << r.theta.transpose() << " vs " << hat.transpose();

  const ObjectivePtr fq = Quadratic(q.a, q.v);
  const SgdResult f = SgdRun(*fq, Dummy(), Vec({0.2, 0.1, 1.5}), cfg);
  EXPECT_LT((f.theta - hat).norm(), 1e-6);
}

TEST(SgdTest, DescendsOnQuadratics) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    Matrix b(3, 3);
    for (int i = 0; i < 3; ++i) b.col(i) = testing::RandomVector(3, &rng);
    const Matrix a = b * b.transpose() + 0.5 * Matrix::Identity(3, 3);
    const Vector v = testing::RandomVector(3, &rng);
    OptimConfig cfg;
    cfg.step = 0.4 / Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().maxCoeff();
    cfg.max_iters = 50;
    const SgdResult r = SgdRun(*Quadratic(a, v), Dummy(), testing::RandomVector(3, &rng), cfg);
    const auto& rows = r.trajectory.rows;
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LE(rows[k].loss, rows[k - 1].loss + 1e-14);
  }
}

TEST(SgdTest, DeterministicAcrossThreadCounts) {
  const Sample s = SampleFrom("gaussian_meancov", Vec({0.0, -0.5, 1.0}), 400, 5, {{"d", 2}});
  const ObjectivePtr obj = DksdObjective(BuiltinModel("gaussian_meancov", {{"d", 2}}),
                                         MatrixKernel::ScaledIdentity(2, GaussianKernel(1.0)),
                                         BuiltinDiffusion("identity"));
  OptimConfig cfg;
  cfg.step = 0.2;
  cfg.max_iters = 20;
  cfg.batch_size = 100;
  cfg.preconditioner = Preconditioner::kInfo;
  cfg.full_loss_every = 5;
  std::string one, eight;
  {
    ThreadEnv env("1");
    one = TrajectoryCsv(SgdRun(*obj, s, Vec({1.0, 1.0, 2.0}), cfg).trajectory);
  }
  {
    ThreadEnv env("8");
    eight = TrajectoryCsv(SgdRun(*obj, s, Vec({1.0, 1.0, 2.0}), cfg).trajectory);
  }
  EXPECT_EQ(one, eight);
  EXPECT_NE(one.find("iter,theta_0,theta_1,theta_2,loss,grad_norm,full_loss,millis\n"),
            std::string::npos);
}

TEST(SgdTest, OneOverTScheduleAndTolerance) {
  OptimConfig cfg;
  cfg.schedule = StepSchedule::kOneOverT;
  cfg.step = 0.25;
  cfg.max_iters = 3;
  const SgdResult r = SgdRun(*Quadratic(Matrix::Identity(1, 1), Vector::Zero(1)), Dummy(), Vec({1.0}), cfg);
  // theta <- theta (1 - 2 gamma_0 / (t + 1)).
  EXPECT_DOUBLE_EQ(r.theta(0), 0.5 * 0.75 * (1.0 - 0.5 / 3.0));
  cfg.schedule = StepSchedule::kConstant;
  cfg.step = 0.5;
  cfg.max_iters = 100;
  cfg.tol = 1e-3;
  EXPECT_LE(SgdRun(*Quadratic(Matrix::Identity(1, 1), Vector::Zero(1)), Dummy(), Vec({1.0}), cfg)
                .trajectory.rows.size(),
            2u);
}

TEST(SgdTest, LogSpaceKeepsScalePositive) {
  const Sample s = SampleFrom("student_t", Vec({0.0, 1.0}), 200, 6);
  const ObjectivePtr obj = DsmObjective(BuiltinModel("student_t"), BuiltinDiffusion("identity"));
  OptimConfig cfg;
  cfg.step = 0.05;
  cfg.max_iters = 200;
  cfg.batch_size = 0;
  const SgdResult r = SgdRun(*obj, s, Vec({0.5, 3.0}), cfg);
  EXPECT_FALSE(r.trajectory.aborted) << r.trajectory.message;
  EXPECT_GT(r.theta(1), 0.0);
  EXPECT_LT(r.trajectory.rows.back().loss, r.trajectory.rows.front().loss);
}

TEST(SgdTest, ConfigErrors) {
  const ObjectivePtr q = Quadratic(Matrix::Identity(1, 1), Vector::Zero(1));
  OptimConfig cfg;
  cfg.step = 0.0;
  EXPECT_THROW(SgdRun(*q, Dummy(), Vec({1.0}), cfg), ConfigError);
  cfg.step = 0.1;
  EXPECT_THROW(SgdRun(*q, Dummy(), Vec({1.0, 2.0}), cfg), ConfigError);
  const ObjectivePtr dk = DksdObjective(BuiltinModel("gaussian_location"),
                                        MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0)),
                                        BuiltinDiffusion("identity"));
  cfg.batch_size = 1;
  EXPECT_THROW(SgdRun(*dk, SampleFrom("gaussian_location", Vec({0.0}), 10, 1), Vec({0.0}), cfg),
               ConfigError);
}

TEST(SgdTest, NonFiniteAborts) {
  FunctionObjectiveFns fns;
  fns.value = [](const Vector& t) { return t(0) > 1.5 ? std::nan("") : t(0) * t(0); };
  fns.grad = [](const Vector& t) -> Vector { return Vector::Constant(1, -1.0 + 0 * t(0)); };
  OptimConfig cfg;
  cfg.step = 1.0;
  cfg.max_iters = 10;
  const SgdResult r = SgdRun(*FunctionObjective(1, fns), Dummy(), Vec({0.0}), cfg);
  EXPECT_TRUE(r.trajectory.aborted);
  EXPECT_EQ(r.trajectory.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(r.theta(0), 2.0);
}

TEST(GridTest, SinglePointAndArgmin) {
  const ObjectivePtr q = Quadratic(Matrix::Identity(1, 1), Vec({-1.0}));
  const std::vector<GridRow> one = GridScan(*q, Dummy(), {Vec({0.3})});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one[0].ok);
  EXPECT_EQ(GridArgmin(one), 0);
  EXPECT_EQ(GridCsv(one), "theta_0,loss\n0.3,-0.21\n");
  std::vector<Vector> grid;
  for (double x : Linspace(-1.0, 2.0, 31)) grid.push_back(Vec({x}));
  const std::vector<GridRow> rows = GridScan(*q, Dummy(), grid);
  EXPECT_NEAR(rows[GridArgmin(rows)].theta(0), 0.5, 1e-12);
  EXPECT_EQ(GridArgmin({}), -1);
}

TEST(GridTest, FailuresAreNan) {
  FunctionObjectiveFns fns;
  fns.value = [](const Vector& t) -> double {
    if (t(0) < 0) throw NumericalError("negative");
    return t(0);
  };
  fns.grad = [](const Vector& t) -> Vector { return Vector::Ones(t.size()); };
  const std::vector<GridRow> rows = GridScan(*FunctionObjective(1, fns), Dummy(), {Vec({-1.0}), Vec({1.0})});
  EXPECT_FALSE(rows[0].ok);
  EXPECT_TRUE(std::isnan(rows[0].loss));
  EXPECT_EQ(GridArgmin(rows), 1);
  EXPECT_NE(GridCsv(rows).find("-1,nan"), std::string::npos);
}

TEST(GridTest, ArgminAgreesWithSgd) {
  const Sample s = SampleFrom("gaussian_meancov", Vec({0.4, 1.0}), 300, 8);
  const ObjectivePtr obj = SubsetObjective(
      DksdObjective(BuiltinModel("gaussian_meancov"), MatrixKernel::ScaledIdentity(1, GaussianKernel(1.0)),
                    BuiltinDiffusion("identity")),
      Vec({0.0, 1.0}), {0});
  std::vector<Vector> grid;
  for (double x : Linspace(-1.0, 2.0, 301)) grid.push_back(Vec({x}));
  const std::vector<GridRow> rows = GridScan(*obj, s, grid);
  const double best = rows[GridArgmin(rows)].theta(0);
  OptimConfig cfg;
  cfg.step = 0.5;
  cfg.max_iters = 200;
  cfg.batch_size = 0;
  cfg.preconditioner = Preconditioner::kInfo;
  const SgdResult r = SgdRun(*obj, s, Vec({1.5}), cfg);
  EXPECT_NEAR(r.theta(0), best, 0.011);
  const ScalarFit fit = FitCoordinate(*obj, s, Vec({0.0}), 0, -1.0, 2.0, 31, 1e-8);
  EXPECT_NEAR(fit.theta, r.theta(0), 1e-5);
}

TEST(GridTest, LinspaceAndGoldenSection) {
  const std::vector<double> v = Linspace(0.0, 1.0, 5);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v.front(), 0.0);
  EXPECT_EQ(v.back(), 1.0);
  EXPECT_DOUBLE_EQ(v[1], 0.25);
  EXPECT_EQ(Linspace(2.0, 3.0, 1), std::vector<double>{2.0});
  EXPECT_NEAR(GoldenSectionMin([](double x) { return std::pow(x - 0.3, 2); }, -1, 1, 1e-10), 0.3, 1e-8);
}

}  // namespace
}  // namespace steinest
