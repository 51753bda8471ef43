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

#include "steinest/kernel.h"

#include <cmath>
#include <numbers>
#include <utility>

namespace steinest {

Vector ScalarKernel::GradX(const PointRef& x, const PointRef& y) const {
  KernelDerivs kd;
  Derivs(x, y, &kd);
  return kd.gx;
}

Vector ScalarKernel::GradY(const PointRef& x, const PointRef& y) const {
  KernelDerivs kd;
  Derivs(x, y, &kd);
  return kd.gy;
}

Matrix ScalarKernel::GradXY(const PointRef& x, const PointRef& y) const {
  KernelDerivs kd;
  Derivs(x, y, &kd);
  return kd.gxy;
}

namespace {

void CheckPair(const PointRef& x, const PointRef& y) {
  if (x.size() != y.size()) throw ConfigError("kernel arguments differ in dimension");
  if (x.size() > kMaxDim) throw ConfigError("dimension exceeds the supported maximum");
}

class Gaussian : public ScalarKernel {
 public:
  explicit Gaussian(double ell) : inv_l2_(1.0 / (ell * ell)) {}
  std::string name() const override { return "gaussian"; }

  double Eval(const PointRef& x, const PointRef& y) const override {
    CheckPair(x, y);
    return std::exp(-0.5 * (x - y).squaredNorm() * inv_l2_);
  }

  void Derivs(const PointRef& x, const PointRef& y,
              KernelDerivs* out) const override {
    CheckPair(x, y);
    SmallVec delta = x - y;
    const double k = std::exp(-0.5 * delta.squaredNorm() * inv_l2_);
    out->k = k;
    out->gx = (-k * inv_l2_) * delta;
    out->gy = -out->gx;
    out->gxy.noalias() = (-k * inv_l2_ * inv_l2_) * delta * delta.transpose();
    out->gxy.diagonal().array() += k * inv_l2_;
  }

 private:
  double inv_l2_;
};

class Imq : public ScalarKernel {
 public:
  Imq(double c, double beta, double ell)
      : c2_(c * c), beta_(beta), inv_l2_(1.0 / (ell * ell)) {}
  std::string name() const override { return "imq"; }

  double Eval(const PointRef& x, const PointRef& y) const override {
    CheckPair(x, y);
    return std::pow(c2_ + (x - y).squaredNorm() * inv_l2_, beta_);
  }

  void Derivs(const PointRef& x, const PointRef& y,
              KernelDerivs* out) const override {
    CheckPair(x, y);
    SmallVec delta = x - y;
    const double q = c2_ + delta.squaredNorm() * inv_l2_;
    const double k = std::pow(q, beta_);
    const double qb1 = k / q;
    const double qb2 = qb1 / q;
    out->k = k;
    out->gx = (2.0 * beta_ * qb1 * inv_l2_) * delta;
    out->gy = -out->gx;
    out->gxy.noalias() = (-4.0 * beta_ * (beta_ - 1.0) * qb2 * inv_l2_ * inv_l2_) *
                         delta * delta.transpose();
    out->gxy.diagonal().array() += -2.0 * beta_ * qb1 * inv_l2_;
  }

 private:
  double c2_;
  double beta_;
  double inv_l2_;
};

class DensityWeightedGaussian : public ScalarKernel {
 public:
  DensityWeightedGaussian(double gamma, KnownDensity q)
      : gamma_(gamma), q_(std::move(q)) {}
  std::string name() const override { return "density_weighted_gaussian"; }

  double LogEval(const PointRef& x, const PointRef& y) const {
    const double g2 = gamma_ * gamma_;
    const double d = static_cast<double>(x.size());
    const double log_phi = -0.5 * (x - y).squaredNorm() / g2 -
                           0.5 * d * std::log(2.0 * std::numbers::pi * g2);
    const double lqx = q_.log_pdf(x);
    const double lqy = q_.log_pdf(y);
    if (!std::isfinite(lqx) || !std::isfinite(lqy)) {
      throw NumericalError("reference density vanishes at a sample point");
    }
    return log_phi - 0.5 * (lqx + lqy);
  }

  double Eval(const PointRef& x, const PointRef& y) const override {
    CheckPair(x, y);
    return std::exp(LogEval(x, y));
  }

  void Derivs(const PointRef& x, const PointRef& y,
              KernelDerivs* out) const override {
    CheckPair(x, y);
    const double g2 = gamma_ * gamma_;
    const double k = std::exp(LogEval(x, y));
    SmallVec delta = x - y;
    SmallVec a = -0.5 * q_.score(x) - delta / g2;
    SmallVec b = -0.5 * q_.score(y) + delta / g2;
    out->k = k;
    out->gx = k * a;
    out->gy = k * b;
    out->gxy.noalias() = k * a * b.transpose();
    out->gxy.diagonal().array() += k / g2;
  }

 private:
  double gamma_;
  KnownDensity q_;
};

}  // namespace

ScalarKernelPtr GaussianKernel(double lengthscale) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw ConfigError("gaussian kernel requires a positive lengthscale");
  }
  return std::make_shared<Gaussian>(lengthscale);
}

ScalarKernelPtr ImqKernel(double c, double beta, double lengthscale) {
  if (!(c > 0.0) || !(beta < 0.0) || !(lengthscale > 0.0)) {
    throw ConfigError("imq kernel requires c > 0, beta < 0 and lengthscale > 0");
  }
  return std::make_shared<Imq>(c, beta, lengthscale);
}

ScalarKernelPtr BuiltinScalarKernel(const std::string& name,
                                    const Hyper& hyper) {
  if (name == "gaussian") return GaussianKernel(HyperOr(hyper, "lengthscale", 1.0));
  if (name == "imq") {
    return ImqKernel(HyperOr(hyper, "c", 1.0), HyperOr(hyper, "beta", -0.5),
                     HyperOr(hyper, "lengthscale", 1.0));
  }
  throw ConfigError("unknown kernel id '" + name + "'");
}

std::vector<std::string> BuiltinKernelIds() { return {"gaussian", "imq"}; }

KnownDensity IsotropicGaussianDensity(Vector mean, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("density scale must be positive");
  const double s2 = sigma * sigma;
  const double d = static_cast<double>(mean.size());
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * s2);
  KnownDensity q;
  q.log_pdf = [mean, s2, log_norm](const PointRef& x) {
    return log_norm - 0.5 * (x - mean).squaredNorm() / s2;
  };
  q.score = [mean, s2](const PointRef& x) -> Vector { return -(x - mean) / s2; };
  return q;
}

ScalarKernelPtr DensityWeightedGaussianKernel(double gamma, KnownDensity q) {
  if (!(gamma > 0.0)) throw ConfigError("bandwidth must be positive");
  return std::make_shared<DensityWeightedGaussian>(gamma, std::move(q));
}

MatrixKernel MatrixKernel::Scaled(Matrix b, ScalarKernelPtr k) {
  if (!k) throw ConfigError("scaled matrix kernel needs a scalar kernel");
  if (b.rows() != b.cols() || b.rows() < 1 || b.rows() > kMaxDim) {
    throw ConfigError("scaled matrix kernel needs a square matrix B");
  }
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + b.cwiseAbs().maxCoeff())) {
    throw ConfigError("matrix B must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues()(0) > 0.0)) {
    throw ConfigError("matrix B must be positive definite");
  }
  MatrixKernel mk;
  mk.form_ = Form::kScaled;
  mk.dim_ = static_cast<int>(b.rows());
  mk.b_identity_ = b.isIdentity(0.0);
  mk.b_ = std::move(b);
  mk.kernels_ = {std::move(k)};
  return mk;
}

MatrixKernel MatrixKernel::ScaledIdentity(int d, ScalarKernelPtr k) {
  return Scaled(Matrix::Identity(d, d), std::move(k));
}

MatrixKernel MatrixKernel::Diagonal(Vector lambda,
                                    std::vector<ScalarKernelPtr> ks) {
  const Index d = lambda.size();
  if (d < 1 || d > kMaxDim || static_cast<Index>(ks.size()) != d) {
    throw ConfigError("diagonal matrix kernel needs one kernel per coordinate");
  }
  if (!(lambda.array() > 0.0).all()) {
    throw ConfigError("diagonal matrix kernel weights must be positive");
  }
  MatrixKernel mk;
  mk.form_ = Form::kDiagonal;
  mk.dim_ = static_cast<int>(d);
  mk.lambda_ = std::move(lambda);
  for (const auto& k : ks) {
    if (!k) throw ConfigError("diagonal matrix kernel has a missing kernel");
    int found = -1;
    for (std::size_t j = 0; j < mk.kernels_.size(); ++j) {
      if (mk.kernels_[j] == k) found = static_cast<int>(j);
    }
    if (found < 0) {
      found = static_cast<int>(mk.kernels_.size());
      mk.kernels_.push_back(k);
    }
    mk.slot_.push_back(found);
  }
  return mk;
}

MatrixKernel MatrixKernel::Scale(double c) const {
  if (!(c > 0.0)) throw ConfigError("kernel scale must be positive");
  MatrixKernel out = *this;
  if (form_ == Form::kScaled) {
    out.b_ = c * b_;
    out.b_identity_ = out.b_.isIdentity(0.0);
  } else {
    out.lambda_ = c * lambda_;
  }
  return out;
}

Matrix MatrixKernel::Eval(const PointRef& x, const PointRef& y) const {
  if (x.size() != dim_ || y.size() != dim_) {
    throw ConfigError("matrix kernel dimension mismatch");
  }
  if (form_ == Form::kScaled) return b_ * kernels_[0]->Eval(x, y);
  Matrix out = Matrix::Zero(dim_, dim_);
  std::vector<double> values(kernels_.size());
  for (std::size_t j = 0; j < kernels_.size(); ++j) values[j] = kernels_[j]->Eval(x, y);
  for (int r = 0; r < dim_; ++r) out(r, r) = lambda_(r) * values[slot_[r]];
  return out;
}

void MatrixKernel::PairDerivs(const PointRef& x, const PointRef& y,
                              KernelPairDerivs* out) const {
  if (x.size() != dim_ || y.size() != dim_) {
    throw ConfigError("matrix kernel dimension mismatch");
  }
  out->count = static_cast<int>(kernels_.size());
  for (std::size_t j = 0; j < kernels_.size(); ++j) {
    kernels_[j]->Derivs(x, y, &out->parts[j]);
  }
}

}  // namespace steinest
