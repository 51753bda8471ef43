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

#include "steinest/model.h"

#include <cmath>
#include <limits>
#include <utility>

#include "steinest/bessel.h"
#include "steinest/expfam.h"

namespace steinest {

double HyperOr(const Hyper& hyper, const std::string& key, double fallback) {
  auto it = hyper.find(key);
  return it == hyper.end() ? fallback : it->second;
}

int HyperDim(const Hyper& hyper, int fallback) {
  const double d = HyperOr(hyper, "d", fallback);
  if (!(d >= 1.0) || d > kMaxDim || d != std::floor(d)) {
    throw ConfigError("dimension d must be an integer in [1, " +
                      std::to_string(kMaxDim) + "]");
  }
  return static_cast<int>(d);
}

std::vector<ParamDomain> Model::theta_domain() const {
  return std::vector<ParamDomain>(dim_theta());
}

Vector Model::Score(const PointRef& x, const Vector& theta) const {
  ModelPoint p;
  Evaluate(x, theta, kNeedScore, &p);
  return p.score;
}

Matrix Model::Hessian(const PointRef& x, const Vector& theta) const {
  ModelPoint p;
  Evaluate(x, theta, kNeedHess, &p);
  return p.hess;
}

Matrix Model::GradThetaScore(const PointRef& x, const Vector& theta) const {
  ModelPoint p;
  Evaluate(x, theta, kNeedThetaScore, &p);
  return p.grad_theta_score;
}

std::vector<Matrix> Model::GradThetaHess(const PointRef& x,
                                         const Vector& theta) const {
  ModelPoint p;
  Evaluate(x, theta, kNeedThetaHess, &p);
  return p.grad_theta_hess;
}

void Model::CheckTheta(const Vector& theta) const {
  if (theta.size() != dim_theta()) {
    throw ConfigError(name() + ": expected " + std::to_string(dim_theta()) +
                      " parameters, got " + std::to_string(theta.size()));
  }
  const auto domain = theta_domain();
  for (Index a = 0; a < theta.size(); ++a) {
    if (!std::isfinite(theta(a)) || !domain[a].Contains(theta(a))) {
      throw ConfigError(name() + ": parameter " + std::to_string(a) +
                        " outside its domain");
    }
  }
}

namespace {

void CheckPoint(const Model& model, const PointRef& x) {
  if (x.size() != model.dim_x()) {
    throw ConfigError(model.name() + ": point has dimension " +
                      std::to_string(x.size()) + ", expected " +
                      std::to_string(model.dim_x()));
  }
}

void ResizeSlots(int d, int m, unsigned needs, ModelPoint* out) {
  if (needs & kNeedScore) out->score.setZero(d);
  if (needs & kNeedHess) out->hess.setZero(d, d);
  if (needs & kNeedThetaScore) out->grad_theta_score.setZero(m, d);
  if (needs & kNeedThetaHess) out->grad_theta_hess.assign(m, Matrix::Zero(d, d));
}

// log p = -||x - theta||^2.
class GaussianLocation : public Model {
 public:
  explicit GaussianLocation(int d) : d_(d) {}
  std::string name() const override { return "gaussian_location"; }
  int dim_x() const override { return d_; }
  int dim_theta() const override { return d_; }

  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return -(x - theta).squaredNorm();
  }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    CheckPoint(*this, x);
    ResizeSlots(d_, d_, needs, out);
    if (needs & kNeedScore) out->score = -2.0 * (x - theta);
    if (needs & kNeedHess) out->hess = -2.0 * Matrix::Identity(d_, d_);
    if (needs & kNeedThetaScore) {
      out->grad_theta_score = 2.0 * Matrix::Identity(d_, d_);
    }
  }

 private:
  int d_;
};

// theta = (mu, sigma), log p = -||x - mu||^2 / (2 sigma^2).
class GaussianMeanCov : public Model {
 public:
  explicit GaussianMeanCov(int d) : d_(d) {}
  std::string name() const override { return "gaussian_meancov"; }
  int dim_x() const override { return d_; }
  int dim_theta() const override { return d_ + 1; }
  std::vector<ParamDomain> theta_domain() const override {
    std::vector<ParamDomain> dom(d_ + 1);
    dom[d_].lo = 0.0;
    return dom;
  }

  double LogDensity(const PointRef& x, const Vector& theta) const override {
    const double s = theta(d_);
    return -(x - theta.head(d_)).squaredNorm() / (2.0 * s * s);
  }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    CheckPoint(*this, x);
    ResizeSlots(d_, d_ + 1, needs, out);
    const double s = theta(d_);
    const double s2 = s * s;
    const Vector delta = x - theta.head(d_);
    if (needs & kNeedScore) out->score = -delta / s2;
    if (needs & kNeedHess) out->hess = -Matrix::Identity(d_, d_) / s2;
    if (needs & kNeedThetaScore) {
      out->grad_theta_score.topRows(d_) = Matrix::Identity(d_, d_) / s2;
      out->grad_theta_score.row(d_) = 2.0 * delta.transpose() / (s2 * s);
    }
    if (needs & kNeedThetaHess) {
      out->grad_theta_hess[d_] = 2.0 * Matrix::Identity(d_, d_) / (s2 * s);
    }
  }

 private:
  int d_;
};

// Radial profile g(z) and its first three derivatives.
struct ProfileValues {
  double g, g1, g2, g3;
};

class RadialProfile {
 public:
  virtual ~RadialProfile() = default;
  virtual double Value(double z) const = 0;
  virtual ProfileValues Derivs(double z) const = 0;
};

class LaplaceProfile : public RadialProfile {
 public:
  double Value(double z) const override { return -z; }
  ProfileValues Derivs(double z) const override { return {-z, -1.0, 0.0, 0.0}; }
};

class StudentProfile : public RadialProfile {
 public:
  explicit StudentProfile(double nu) : nu_(nu) {}
  double Value(double z) const override {
    return -0.5 * (nu_ + 1.0) * std::log1p(z * z / nu_);
  }
  ProfileValues Derivs(double z) const override {
    const double q = nu_ + z * z;
    const double c = nu_ + 1.0;
    return {Value(z), -c * z / q, -c * (nu_ - z * z) / (q * q),
            2.0 * c * z * (3.0 * nu_ - z * z) / (q * q * q)};
  }

 private:
  double nu_;
};

// g(z) = nu log z + log K_nu(z).
class BesselProfile : public RadialProfile {
 public:
  explicit BesselProfile(double order) : nu_(order) {}
  double Value(double z) const override {
    if (z == 0.0) {
      // K_nu(z) z^nu -> Gamma(nu) 2^(nu-1) as z -> 0.
      return std::lgamma(nu_) + (nu_ - 1.0) * std::log(2.0);
    }
    return nu_ * std::log(z) + LogBesselK(nu_, z);
  }
  ProfileValues Derivs(double z) const override {
    const double r = BesselKRatio(nu_, z);
    const double k = (2.0 * nu_ - 1.0) / z;
    const double r1 = -1.0 + k * r + r * r;
    const double r2 = k * r1 - k / z * r + 2.0 * r * r1;
    return {Value(z), -r, -r1, -r2};
  }

 private:
  double nu_;
};

// log p = g(||x - theta_1|| / theta_2), theta = (theta_1 in R^d, theta_2 > 0).
class RadialLocationScale : public Model {
 public:
  RadialLocationScale(std::string name, int d,
                      std::unique_ptr<RadialProfile> profile)
      : name_(std::move(name)), d_(d), profile_(std::move(profile)) {}

  std::string name() const override { return name_; }
  int dim_x() const override { return d_; }
  int dim_theta() const override { return d_ + 1; }
  std::vector<ParamDomain> theta_domain() const override {
    std::vector<ParamDomain> dom(d_ + 1);
    dom[d_].lo = 0.0;
    return dom;
  }

  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return profile_->Value((x - theta.head(d_)).norm() / theta(d_));
  }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    CheckPoint(*this, x);
    ResizeSlots(d_, d_ + 1, needs, out);
    const Vector delta = x - theta.head(d_);
    const double t = theta(d_);
    const double r = delta.norm();
    if (d_ == 1) {
      EvaluateLine(delta(0), t, needs, out);
    } else {
      EvaluateRadial(delta, r, t, needs, out);
    }
  }

 private:
  // Smallest radius used for the even-order terms at the exact center.
  static constexpr double kTinyZ = 1e-8;

  void EvaluateLine(double delta, double t, unsigned needs,
                    ModelPoint* out) const {
    const double s = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
    const double z = std::max(std::abs(delta) / t, s == 0.0 ? kTinyZ : 0.0);
    const ProfileValues p = profile_->Derivs(z);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double hess = p.g2 / t2;
    if (needs & kNeedScore) out->score(0) = p.g1 * s / t;
    if (needs & kNeedHess) out->hess(0, 0) = hess;
    if (needs & kNeedThetaScore) {
      out->grad_theta_score(0, 0) = -hess;
      out->grad_theta_score(1, 0) = -(p.g2 * z + p.g1) * s / t2;
    }
    if (needs & kNeedThetaHess) {
      out->grad_theta_hess[0](0, 0) = -p.g3 * s / t3;
      out->grad_theta_hess[1](0, 0) = -(p.g3 * z + 2.0 * p.g2) / t3;
    }
  }

  void EvaluateRadial(const Vector& delta, double r, double t, unsigned needs,
                      ModelPoint* out) const {
    const int d = d_;
    const Matrix eye = Matrix::Identity(d, d);
    const double t2 = t * t;
    if (r == 0.0) {
      // Limits at the center: odd-order terms vanish.
      const ProfileValues p = profile_->Derivs(kTinyZ);
      const double a = p.g1 / kTinyZ;
      if (needs & kNeedHess) out->hess = a / t2 * eye;
      if (needs & kNeedThetaScore) out->grad_theta_score.topRows(d) = -a / t2 * eye;
      if (needs & kNeedThetaHess) {
        out->grad_theta_hess[d] = -2.0 * a / (t2 * t) * eye;
      }
      return;
    }
    const double z = r / t;
    const ProfileValues p = profile_->Derivs(z);
    const double a = p.g1 / z;
    const double b = (p.g2 - a) / (z * z);
    const double c = p.g3 / (z * z * z) - 3.0 * b / (z * z);
    const double t4 = t2 * t2;
    const double t6 = t4 * t2;
    const Matrix hess = (a / t2) * eye + (b / t4) * delta * delta.transpose();
    if (needs & kNeedScore) out->score = (a / t2) * delta;
    if (needs & kNeedHess) out->hess = hess;
    if (needs & kNeedThetaScore) {
      out->grad_theta_score.topRows(d) = -hess;
      out->grad_theta_score.row(d) =
          (-(b * z * z + 2.0 * a) / (t2 * t)) * delta.transpose();
    }
    if (needs & kNeedThetaHess) {
      for (int k = 0; k < d; ++k) {
        Matrix& third = out->grad_theta_hess[k];
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            const double sym = delta(k) * (i == j) + delta(i) * (j == k) +
                               delta(j) * (i == k);
            third(i, j) = -((b / t4) * sym +
                            (c / t6) * delta(i) * delta(j) * delta(k));
          }
        }
      }
      out->grad_theta_hess[d] =
          (-(b * z * z + 2.0 * a) / (t2 * t)) * eye +
          (-(c * z * z + 4.0 * b) / (t4 * t)) * delta * delta.transpose();
    }
  }

  std::string name_;
  int d_;
  std::unique_ptr<RadialProfile> profile_;
};

// log p = -|x - theta_1|^theta_2 in one dimension.
class GeneralizedGamma : public Model {
 public:
  std::string name() const override { return "generalized_gamma"; }
  int dim_x() const override { return 1; }
  int dim_theta() const override { return 2; }
  std::vector<ParamDomain> theta_domain() const override {
    std::vector<ParamDomain> dom(2);
    dom[1].lo = 0.0;
    return dom;
  }

  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return -std::pow(std::abs(x(0) - theta(0)), theta(1));
  }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    CheckPoint(*this, x);
    ResizeSlots(1, 2, needs, out);
    const double delta = x(0) - theta(0);
    const double p = theta(1);
    const double r = std::abs(delta);
    if (r == 0.0) {
      // Kink convention: every derivative is reported as zero at the center.
      return;
    }
    const double s = delta > 0.0 ? 1.0 : -1.0;
    const double lr = std::log(r);
    const double rp1 = std::pow(r, p - 1.0);
    const double rp2 = rp1 / r;
    const double rp3 = rp2 / r;
    const double hess = -p * (p - 1.0) * rp2;
    if (needs & kNeedScore) out->score(0) = -p * rp1 * s;
    if (needs & kNeedHess) out->hess(0, 0) = hess;
    if (needs & kNeedThetaScore) {
      out->grad_theta_score(0, 0) = -hess;
      out->grad_theta_score(1, 0) = -s * rp1 * (1.0 + p * lr);
    }
    if (needs & kNeedThetaHess) {
      out->grad_theta_hess[0](0, 0) = p * (p - 1.0) * (p - 2.0) * rp3 * s;
      out->grad_theta_hess[1](0, 0) =
          -((2.0 * p - 1.0) + p * (p - 1.0) * lr) * rp2;
    }
  }
};

class FunctionModel : public Model {
 public:
  FunctionModel(std::string name, int d, int m, LogDensityFn f,
                std::vector<ParamDomain> domain)
      : name_(std::move(name)), d_(d), m_(m), f_(std::move(f)),
        domain_(std::move(domain)) {
    if (domain_.empty()) domain_.resize(m_);
    if (static_cast<int>(domain_.size()) != m_) {
      throw ConfigError("domain size does not match parameter count");
    }
  }
  std::string name() const override { return name_; }
  int dim_x() const override { return d_; }
  int dim_theta() const override { return m_; }
  std::vector<ParamDomain> theta_domain() const override { return domain_; }
  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return f_(x, theta);
  }
  void Evaluate(const PointRef&, const Vector&, unsigned,
                ModelPoint*) const override {
    throw ConfigError(name_ + ": no analytic derivatives; use FiniteDiffWrap");
  }

 private:
  std::string name_;
  int d_, m_;
  LogDensityFn f_;
  std::vector<ParamDomain> domain_;
};

class FiniteDiffModel : public Model {
 public:
  explicit FiniteDiffModel(ModelPtr base) : base_(std::move(base)) {}
  std::string name() const override { return base_->name() + "+fd"; }
  int dim_x() const override { return base_->dim_x(); }
  int dim_theta() const override { return base_->dim_theta(); }
  std::vector<ParamDomain> theta_domain() const override {
    return base_->theta_domain();
  }
  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return base_->LogDensity(x, theta);
  }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    CheckPoint(*this, x);
    const int d = dim_x();
    const int m = dim_theta();
    ResizeSlots(d, m, needs, out);
    // Joint coordinates (x, theta) so that mixed stencils share one routine.
    Vector z(d + m);
    z << x, theta;
    auto f = [&](const Vector& w) {
      const double v = base_->LogDensity(w.head(d), w.tail(m));
      return v;
    };
    constexpr double eps = std::numeric_limits<double>::epsilon();
    auto step = [&](int k, double power) {
      return std::pow(eps, power) * std::max(1.0, std::abs(z(k)));
    };
    if (needs & kNeedScore) {
      for (int i = 0; i < d; ++i) out->score(i) = First(f, z, i, step(i, 1.0 / 3));
    }
    if (needs & kNeedHess) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
          const double v = Second(f, z, i, j, step(i, 0.25), step(j, 0.25));
          out->hess(i, j) = v;
          out->hess(j, i) = v;
        }
      }
    }
    if (needs & kNeedThetaScore) {
      for (int a = 0; a < m; ++a) {
        for (int i = 0; i < d; ++i) {
          out->grad_theta_score(a, i) =
              Second(f, z, d + a, i, step(d + a, 0.25), step(i, 0.25));
        }
      }
    }
    if (needs & kNeedThetaHess) {
      for (int a = 0; a < m; ++a) {
        const double ha = step(d + a, 0.2);
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j <= i; ++j) {
            const double hi = step(i, 0.2);
            const double hj = step(j, 0.2);
            Vector zp = z, zm = z;
            zp(d + a) += ha;
            zm(d + a) -= ha;
            const double v =
                (Second(f, zp, i, j, hi, hj) - Second(f, zm, i, j, hi, hj)) /
                (2.0 * ha);
            out->grad_theta_hess[a](i, j) = v;
            out->grad_theta_hess[a](j, i) = v;
          }
        }
      }
    }
    const bool finite =
        (!(needs & kNeedScore) || out->score.allFinite()) &&
        (!(needs & kNeedHess) || out->hess.allFinite()) &&
        (!(needs & kNeedThetaScore) || out->grad_theta_score.allFinite());
    if (!finite) throw NumericalError(name() + ": non-finite difference quotient");
  }

 private:
  template <typename F>
  static double First(F& f, const Vector& z, int i, double h) {
    Vector zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    return (f(zp) - f(zm)) / (2.0 * h);
  }

  template <typename F>
  static double Second(F& f, const Vector& z, int i, int j, double hi,
                       double hj) {
    if (i == j) {
      Vector zp = z, zm = z;
      zp(i) += hi;
      zm(i) -= hi;
      return (f(zp) - 2.0 * f(z) + f(zm)) / (hi * hi);
    }
    Vector pp = z, pm = z, mp = z, mm = z;
    pp(i) += hi; pp(j) += hj;
    pm(i) += hi; pm(j) -= hj;
    mp(i) -= hi; mp(j) += hj;
    mm(i) -= hi; mm(j) -= hj;
    return (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * hi * hj);
  }

  ModelPtr base_;
};

class Shifted : public Model {
 public:
  Shifted(ModelPtr base, double c) : base_(std::move(base)), c_(c) {}
  std::string name() const override { return base_->name(); }
  int dim_x() const override { return base_->dim_x(); }
  int dim_theta() const override { return base_->dim_theta(); }
  std::vector<ParamDomain> theta_domain() const override {
    return base_->theta_domain();
  }
  double LogDensity(const PointRef& x, const Vector& theta) const override {
    return base_->LogDensity(x, theta) + c_;
  }
  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                ModelPoint* out) const override {
    base_->Evaluate(x, theta, needs, out);
  }

 private:
  ModelPtr base_;
  double c_;
};

}  // namespace

ModelPtr BuiltinModel(const std::string& name, const Hyper& hyper) {
  if (name == "gaussian_location") {
    return std::make_shared<GaussianLocation>(HyperDim(hyper, 1));
  }
  if (name == "gaussian_meancov") {
    return std::make_shared<GaussianMeanCov>(HyperDim(hyper, 1));
  }
  if (name == "laplace") {
    return std::make_shared<RadialLocationScale>(
        name, HyperDim(hyper, 1), std::make_unique<LaplaceProfile>());
  }
  if (name == "student_t") {
    const double nu = HyperOr(hyper, "nu", 5.0);
    if (!(nu > 0.0)) throw ConfigError("student_t requires nu > 0");
    return std::make_shared<RadialLocationScale>(
        name, HyperDim(hyper, 1), std::make_unique<StudentProfile>(nu));
  }
  if (name == "symmetric_bessel") {
    const int d = HyperDim(hyper, 1);
    const double s = HyperOr(hyper, "s", 1.0);
    if (!(s > 0.5 * d)) throw ConfigError("symmetric_bessel requires s > d/2");
    return std::make_shared<RadialLocationScale>(
        name, d, std::make_unique<BesselProfile>(s - 0.5 * d));
  }
  if (name == "generalized_gamma") {
    if (HyperDim(hyper, 1) != 1) {
      throw ConfigError("generalized_gamma is defined for d = 1 only");
    }
    return std::make_shared<GeneralizedGamma>();
  }
  if (name == "intractable_expfam") {
    return ExpFamModel(BuiltinExpFam(name, hyper));
  }
  throw ConfigError("unknown model id '" + name + "'");
}

std::vector<std::string> BuiltinModelIds() {
  return {"gaussian_location", "gaussian_meancov",  "laplace",
          "symmetric_bessel",  "student_t",         "generalized_gamma",
          "intractable_expfam"};
}

ModelPtr LogDensityModel(std::string name, int dim_x, int dim_theta,
                         LogDensityFn log_density,
                         std::vector<ParamDomain> domain) {
  if (dim_x < 1 || dim_theta < 1) throw ConfigError("dimensions must be positive");
  return std::make_shared<FunctionModel>(std::move(name), dim_x, dim_theta,
                                         std::move(log_density),
                                         std::move(domain));
}

ModelPtr FiniteDiffWrap(ModelPtr base) {
  return std::make_shared<FiniteDiffModel>(std::move(base));
}

ModelPtr ShiftedModel(ModelPtr base, double constant) {
  return std::make_shared<Shifted>(std::move(base), constant);
}

}  // namespace steinest
