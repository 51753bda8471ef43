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

#include "steinest/expfam.h"

#include <cmath>
#include <utility>

#include "steinest/stein_kernel.h"

namespace steinest {
namespace {

// T = (x, -||x||^2 / 2); theta = (tau mu, tau) with tau > 0.
class GaussianNatural : public ExpFamSpec {
 public:
  explicit GaussianNatural(int d) : d_(d) {}
  std::string name() const override { return "gaussian_natural"; }
  int dim_x() const override { return d_; }
  int dim_stat() const override { return d_ + 1; }
  std::vector<ParamDomain> theta_domain() const override {
    std::vector<ParamDomain> dom(d_ + 1);
    dom[d_].lo = 0.0;
    return dom;
  }
  Vector Stat(const PointRef& x) const override {
    Vector t(d_ + 1);
    t << x, -0.5 * x.squaredNorm();
    return t;
  }
  Matrix GradStat(const PointRef& x) const override {
    Matrix g(d_ + 1, d_);
    g.topRows(d_).setIdentity();
    g.row(d_) = -x.transpose();
    return g;
  }
  std::vector<Matrix> HessStat(const PointRef&) const override {
    std::vector<Matrix> h(d_ + 1, Matrix::Zero(d_, d_));
    h[d_] = -Matrix::Identity(d_, d_);
    return h;
  }
  double Base(const PointRef&) const override { return 0.0; }
  Vector GradBase(const PointRef&) const override { return Vector::Zero(d_); }
  Matrix HessBase(const PointRef&) const override { return Matrix::Zero(d_, d_); }

 private:
  int d_;
};

// T = 2x, b = -||x||^2, matching log p = -||x - theta||^2.
class GaussianLocationFamily : public ExpFamSpec {
 public:
  explicit GaussianLocationFamily(int d) : d_(d) {}
  std::string name() const override { return "gaussian_location"; }
  int dim_x() const override { return d_; }
  int dim_stat() const override { return d_; }
  Vector Stat(const PointRef& x) const override { return 2.0 * x; }
  Matrix GradStat(const PointRef&) const override {
    return 2.0 * Matrix::Identity(d_, d_);
  }
  std::vector<Matrix> HessStat(const PointRef&) const override {
    return std::vector<Matrix>(d_, Matrix::Zero(d_, d_));
  }
  double Base(const PointRef& x) const override { return -x.squaredNorm(); }
  Vector GradBase(const PointRef& x) const override { return -2.0 * x; }
  Matrix HessBase(const PointRef&) const override {
    return -2.0 * Matrix::Identity(d_, d_);
  }

 private:
  int d_;
};

// Six-dimensional model with natural parameters
// (-1/2, 0.2, 0.6, 0, 0, 0, theta, 0) against
// (sum x_i^2, x1 (x3 + ... + x6), tanh x1, ..., tanh x6). The only free
// natural parameter multiplies tanh(x5); the fixed terms form the base.
class Intractable : public ExpFamSpec {
 public:
  static constexpr int kDim = 6;
  static constexpr int kCoord = 4;
  static constexpr double kTanhWeight = 0.6;

  Intractable() : c_(Matrix::Zero(kDim, kDim)) {
    for (int i = 2; i < kDim; ++i) c_(0, i) = c_(i, 0) = 0.2;
  }
  std::string name() const override { return "intractable_expfam"; }
  int dim_x() const override { return kDim; }
  int dim_stat() const override { return 1; }
  Vector Stat(const PointRef& x) const override {
    return Vector::Constant(1, std::tanh(x(kCoord)));
  }
  Matrix GradStat(const PointRef& x) const override {
    Matrix g = Matrix::Zero(1, kDim);
    const double th = std::tanh(x(kCoord));
    g(0, kCoord) = 1.0 - th * th;
    return g;
  }
  std::vector<Matrix> HessStat(const PointRef& x) const override {
    Matrix h = Matrix::Zero(kDim, kDim);
    const double th = std::tanh(x(kCoord));
    h(kCoord, kCoord) = -2.0 * th * (1.0 - th * th);
    return {h};
  }
  double Base(const PointRef& x) const override {
    return -0.5 * x.squaredNorm() + 0.5 * x.dot(c_ * x) + kTanhWeight * std::tanh(x(0));
  }
  Vector GradBase(const PointRef& x) const override {
    Vector g = -x + c_ * x;
    const double th = std::tanh(x(0));
    g(0) += kTanhWeight * (1.0 - th * th);
    return g;
  }
  Matrix HessBase(const PointRef& x) const override {
    Matrix h = c_ - Matrix::Identity(kDim, kDim);
    const double th = std::tanh(x(0));
    h(0, 0) += -2.0 * kTanhWeight * th * (1.0 - th * th);
    return h;
  }

 private:
  Matrix c_;
};

class ExpFamAdapter : public Model {
 public:
  explicit ExpFamAdapter(ExpFamPtr spec) : spec_(std::move(spec)) {}
  std::string name() const override { return spec_->name(); }
  int dim_x() const override { return spec_->dim_x(); }
  int dim_theta() const override { return spec_->dim_stat(); }
  std::vector<ParamDomain> theta_domain() const override {
    return spec_->theta_domain();
  }
  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return theta.dot(spec_->Stat(x)) + spec_->Base(x);
  }
  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    if (x.size() != dim_x()) throw ConfigError(name() + ": point dimension mismatch");
    if (needs & (kNeedScore | kNeedThetaScore)) {
      const Matrix g = spec_->GradStat(x);
      if (needs & kNeedScore) out->score = spec_->GradBase(x) + g.transpose() * theta;
      if (needs & kNeedThetaScore) out->grad_theta_score = g;
    }
    if (needs & (kNeedHess | kNeedThetaHess)) {
      std::vector<Matrix> h = spec_->HessStat(x);
      if (needs & kNeedHess) {
        out->hess = spec_->HessBase(x);
        for (Index a = 0; a < theta.size(); ++a) out->hess += theta(a) * h[a];
      }
      if (needs & kNeedThetaHess) out->grad_theta_hess = std::move(h);
    }
  }

 private:
  ExpFamPtr spec_;
};

// Per-point pieces: phi = m^T grad T^T (d x m), t0 = m^T grad b + div m.
struct ExpFamPoint {
  PointFeatures f;
  SmallMat phi;
  SmallVec t0;
};

std::vector<ExpFamPoint> ExpFamPoints(const ExpFamSpec& spec, const Diffusion& m,
                                      const Sample& sample) {
  const Index n = sample.size();
  const Vector no_theta = Vector::Zero(spec.dim_stat());
  std::vector<ExpFamPoint> pts(n);
  ParallelFor(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const Index i = static_cast<Index>(ii);
    const auto x = sample.point(i);
    DiffusionPoint dp;
    m.Evaluate(x, no_theta, 0, &dp);
    ExpFamPoint& p = pts[i];
    p.f.x = x;
    p.f.form = dp.form;
    if (dp.form == DiffusionForm::kFull) {
      p.f.m = dp.m;
    } else {
      p.f.diag = dp.diag;
    }
    p.phi = dp.m.transpose() * spec.GradStat(x).transpose();
    p.t0 = dp.m.transpose() * spec.GradBase(x) + dp.div;
  });
  return pts;
}

void CheckExpFamInputs(const ExpFamSpec& spec, const Diffusion& m,
                       const Sample& sample, Index minimum) {
  if (m.depends_on_theta()) {
    throw ConfigError("closed-form estimators need a diffusion that does not depend on theta");
  }
  if (sample.dim() != spec.dim_x()) {
    throw ConfigError("sample dimension does not match the family");
  }
  if (sample.size() < minimum) {
    throw ConfigError("need at least " + std::to_string(minimum) + " sample points");
  }
  if (spec.dim_stat() > kMaxDim || spec.dim_x() > kMaxDim) {
    throw ConfigError("family too large for the fixed-capacity pair buffers");
  }
}

struct PairQuadratic {
  SmallMat a;
  SmallVec v;
  double c;
};

void PairTerms(const MatrixKernel& kernel, const ExpFamPoint& px,
               const ExpFamPoint& py, KernelPairDerivs* kd, PairContraction* pc,
               PairQuadratic* out) {
  ContractPair(kernel, px.f, py.f, kd, pc);
  const SmallMat kphi_y = pc->k * py.phi;
  out->a.noalias() = px.phi.transpose() * kphi_y;
  const SmallVec kt0_y = pc->k * py.t0;
  const SmallVec kt0_x = pc->k.transpose() * px.t0;
  out->v.noalias() = px.phi.transpose() * (kt0_y + pc->cy);
  out->v.noalias() += py.phi.transpose() * (kt0_x + pc->cx);
  out->c = px.t0.dot(kt0_y) + px.t0.dot(pc->cy) + pc->cx.dot(py.t0) + pc->cxy;
}

struct DsmPointQuadratic {
  Matrix a;
  Vector v;
  double c;
};

DsmPointQuadratic DsmPointTerms(const ExpFamSpec& spec, const Diffusion& m,
                                const PointRef& x) {
  const Vector no_theta = Vector::Zero(spec.dim_stat());
  DiffusionPoint dp;
  m.Evaluate(x, no_theta, kNeedJacobian, &dp);
  const Matrix s = MMTFromPoint(dp);
  const Vector div_s = DivMMTFromPoint(dp);
  const Matrix gt = spec.GradStat(x);
  const Vector gb = spec.GradBase(x);
  const std::vector<Matrix> ht = spec.HessStat(x);
  DsmPointQuadratic q;
  q.a = gt * s * gt.transpose();
  q.v = 2.0 * gt * (s * gb) + 2.0 * gt * div_s;
  for (Index a = 0; a < gt.rows(); ++a) q.v(a) += 2.0 * s.cwiseProduct(ht[a]).sum();
  q.c = gb.dot(s * gb) + 2.0 * div_s.dot(gb) + 2.0 * s.cwiseProduct(spec.HessBase(x)).sum();
  return q;
}

}  // namespace

ExpFamPtr BuiltinExpFam(const std::string& name, const Hyper& hyper) {
  if (name == "gaussian_natural") return std::make_shared<GaussianNatural>(HyperDim(hyper, 1));
  if (name == "gaussian_location") {
    return std::make_shared<GaussianLocationFamily>(HyperDim(hyper, 1));
  }
  if (name == "intractable_expfam") {
    if (HyperDim(hyper, 4) != 4) {
      throw ConfigError("intractable_expfam is defined for d = 4 only");
    }
    return std::make_shared<Intractable>();
  }
  throw ConfigError("unknown exponential family id '" + name + "'");
}

std::vector<std::string> BuiltinExpFamIds() {
  return {"gaussian_natural", "gaussian_location", "intractable_expfam"};
}

ModelPtr ExpFamModel(ExpFamPtr spec) {
  if (!spec) throw ConfigError("missing exponential family");
  return std::make_shared<ExpFamAdapter>(std::move(spec));
}

QuadraticForm DksdQuadratic(const ExpFamSpec& spec, const MatrixKernel& kernel,
                            const Diffusion& m, const Sample& sample) {
  CheckExpFamInputs(spec, m, sample, 2);
  if (kernel.dim() != spec.dim_x()) throw ConfigError("kernel dimension mismatch");
  const Index n = sample.size();
  const Index p = spec.dim_stat();
  const std::vector<ExpFamPoint> pts = ExpFamPoints(spec, m, sample);
  const Index blocks = (n + kReductionBlock - 1) / kReductionBlock;
  struct Accum {
    CompensatedArray a, v;
    CompensatedSum c;
  };
  std::vector<Accum> acc(blocks);
  ParallelFor(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    Accum& s = acc[b];
    s.a.Resize(p * p);
    s.v.Resize(p);
    KernelPairDerivs kd;
    PairContraction pc;
    PairQuadratic q;
    const Index lo = static_cast<Index>(b) * kReductionBlock;
    const Index hi = std::min(n, lo + kReductionBlock);
    for (Index i = lo; i < hi; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        PairTerms(kernel, pts[i], pts[j], &kd, &pc, &q);
        s.a.Add(q.a);
        s.v.Add(q.v);
        s.c.Add(q.c);
      }
    }
  });
  Accum total;
  total.a.Resize(p * p);
  total.v.Resize(p);
  for (const Accum& s : acc) {
    total.a.Add(s.a);
    total.v.Add(s.v);
    total.c.Add(s.c);
  }
  const double scale = 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  QuadraticForm out;
  out.a = Symmetrize(scale * total.a.Value(p, p));
  out.v = scale * total.v.Value(p, 1).col(0);
  out.c = scale * total.c.value();
  return out;
}

QuadraticForm DsmQuadratic(const ExpFamSpec& spec, const Diffusion& m,
                           const Sample& sample) {
  CheckExpFamInputs(spec, m, sample, 1);
  const Index n = sample.size();
  const Index p = spec.dim_stat();
  CompensatedArray a(p * p), v(p);
  CompensatedSum c;
  for (Index i = 0; i < n; ++i) {
    const DsmPointQuadratic q = DsmPointTerms(spec, m, sample.point(i));
    a.Add(q.a);
    v.Add(q.v);
    c.Add(q.c);
  }
  const double dn = static_cast<double>(n);
  QuadraticForm out;
  out.a = Symmetrize(a.Value(p, p) / dn);
  out.v = v.Value(p, 1).col(0) / dn;
  out.c = c.value() / dn;
  return out;
}

Vector SolveQuadratic(const QuadraticForm& q) {
  const Matrix a = Symmetrize(q.a);
  const Index m = a.rows();
  if (m == 0 || q.v.size() != m) throw ConfigError("malformed quadratic form");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues()(0);
  const double trace = a.trace();
  if (!(min_eig > 1e-12 * std::abs(trace) / static_cast<double>(m)) || !(trace > 0.0)) {
    throw NumericalError("quadratic form is singular (min eigenvalue " +
                         std::to_string(min_eig) +
                         "); try a larger sample or a different kernel");
  }
  Eigen::LDLT<Matrix> ldlt(a);
  Vector theta = -0.5 * ldlt.solve(q.v);
  if (!theta.allFinite()) throw NumericalError("closed-form solve produced non-finite values");
  return theta;
}

Matrix ExpFamAsymptoticCov(LossKind kind, const ExpFamSpec& spec,
                           const MatrixKernel* kernel, const Diffusion& m,
                           const Sample& sample) {
  const Index n = sample.size();
  const Index p = spec.dim_stat();
  Matrix zeta(n, p);
  Matrix a;
  Vector theta;
  if (kind == LossKind::kDsm) {
    const QuadraticForm q = DsmQuadratic(spec, m, sample);
    theta = SolveQuadratic(q);
    a = q.a;
    for (Index i = 0; i < n; ++i) {
      const DsmPointQuadratic t = DsmPointTerms(spec, m, sample.point(i));
      zeta.row(i) = (t.v + 2.0 * t.a * theta).transpose();
    }
    // Loss Hessian is 2a; the estimating function is grad F.
    a *= 2.0;
  } else {
    if (!kernel) throw ConfigError("DKSD covariance needs a kernel");
    const QuadraticForm q = DksdQuadratic(spec, *kernel, m, sample);
    theta = SolveQuadratic(q);
    a = q.a;
    const std::vector<ExpFamPoint> pts = ExpFamPoints(spec, m, sample);
    ParallelFor(static_cast<std::size_t>(n), [&](std::size_t ii) {
      const Index i = static_cast<Index>(ii);
      KernelPairDerivs kd;
      PairContraction pc;
      PairQuadratic q2;
      CompensatedArray acc(p);
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        PairTerms(*kernel, pts[i], pts[j], &kd, &pc, &q2);
        const SmallMat sym = 0.5 * (q2.a + q2.a.transpose());
        acc.Add(SmallVec(q2.v + 2.0 * sym * SmallVec(theta)));
      }
      zeta.row(i) = acc.Value(p, 1).col(0).transpose() / static_cast<double>(n - 1);
    });
  }
  const Matrix sigma = zeta.transpose() * zeta / static_cast<double>(n);
  Eigen::LDLT<Matrix> ldlt(Symmetrize(a));
  const Matrix left = ldlt.solve(sigma);
  const Matrix cov = ldlt.solve(Matrix(left.transpose()));
  return Symmetrize(cov);
}

}  // namespace steinest
