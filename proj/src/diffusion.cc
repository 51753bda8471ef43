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

#include "steinest/diffusion.h"

#include <cmath>
#include <random>

namespace steinest {

Matrix Diffusion::Eval(const PointRef& x, const Vector& theta) const {
  DiffusionPoint p;
  Evaluate(x, theta, 0, &p);
  return p.m;
}

Vector Diffusion::DivX(const PointRef& x, const Vector& theta) const {
  DiffusionPoint p;
  Evaluate(x, theta, 0, &p);
  return p.div;
}

std::vector<Matrix> Diffusion::GradTheta(const PointRef& x,
                                         const Vector& theta) const {
  DiffusionPoint p;
  Evaluate(x, theta, kNeedThetaDiff, &p);
  return p.dtheta;
}

Matrix Diffusion::GradThetaDivX(const PointRef& x, const Vector& theta) const {
  DiffusionPoint p;
  Evaluate(x, theta, kNeedThetaDiff, &p);
  return p.dtheta_div;
}

Matrix Diffusion::MMT(const PointRef& x, const Vector& theta) const {
  DiffusionPoint p;
  Evaluate(x, theta, 0, &p);
  return MMTFromPoint(p);
}

Vector Diffusion::DivMMT(const PointRef& x, const Vector& theta) const {
  DiffusionPoint p;
  Evaluate(x, theta, kNeedJacobian, &p);
  return DivMMTFromPoint(p);
}

Matrix MMTFromPoint(const DiffusionPoint& p) {
  if (p.form != DiffusionForm::kFull) {
    return p.diag.array().square().matrix().asDiagonal();
  }
  return p.m * p.m.transpose();
}

Vector DivMMTFromPoint(const DiffusionPoint& p) {
  // sum_i d_i (m m^T)_ij = (m div m)_j + sum_{i,k} m_ik d_i m_jk.
  const Index d = p.m.rows();
  if (static_cast<Index>(p.jac.size()) != d) {
    throw ConfigError("divergence of m m^T needs the Jacobian of m");
  }
  Vector out = p.m * p.div;
  for (Index j = 0; j < d; ++j) {
    double acc = 0.0;
    for (Index i = 0; i < d; ++i) {
      for (Index k = 0; k < d; ++k) acc += p.m(i, k) * p.jac[i](j, k);
    }
    out(j) += acc;
  }
  return out;
}

namespace {

void Prepare(DiffusionForm form, Index d, Index mt, unsigned needs,
             DiffusionPoint* out) {
  out->form = form;
  out->m.setZero(d, d);
  out->diag.setZero(d);
  out->div.setZero(d);
  if (needs & kNeedJacobian) {
    out->jac.assign(d, Matrix::Zero(d, d));
  } else {
    out->jac.clear();
  }
  if (needs & kNeedThetaDiff) {
    out->dtheta.assign(mt, Matrix::Zero(d, d));
    out->dtheta_div.setZero(mt, d);
  } else {
    out->dtheta.clear();
    out->dtheta_div.resize(0, 0);
  }
}

void CheckTheta(const Diffusion& m, const PointRef& x, const Vector& theta) {
  if (theta.size() < m.theta_used(static_cast<int>(x.size()))) {
    throw ConfigError("diffusion '" + m.name() + "' needs " +
                      std::to_string(m.theta_used(static_cast<int>(x.size()))) +
                      " parameters");
  }
  if (m.fixed_dim() != 0 && x.size() != m.fixed_dim()) {
    throw ConfigError("diffusion '" + m.name() + "' is defined for d = " +
                      std::to_string(m.fixed_dim()) + " only");
  }
}

// Scalar field h(x, theta) I: subclasses provide h, grad_x h and the theta
// derivatives of h and grad_x h.
class ScalarField : public Diffusion {
 public:
  DiffusionForm form() const override { return DiffusionForm::kScalar; }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                DiffusionPoint* out) const override {
    CheckTheta(*this, x, theta);
    const Index d = x.size();
    const Index mt = theta.size();
    Prepare(form(), d, mt, needs, out);
    double h = 0.0;
    Vector grad(d);
    Vector dh = Vector::Zero(mt);
    Matrix dgrad = Matrix::Zero(mt, d);
    Field(x, theta, (needs & kNeedThetaDiff) != 0, &h, &grad, &dh, &dgrad);
    out->diag.setConstant(h);
    out->m.diagonal().setConstant(h);
    out->div = grad;
    if (needs & kNeedJacobian) {
      for (Index k = 0; k < d; ++k) out->jac[k].diagonal().setConstant(grad(k));
    }
    if (needs & kNeedThetaDiff) {
      for (Index a = 0; a < mt; ++a) out->dtheta[a].diagonal().setConstant(dh(a));
      out->dtheta_div = dgrad;
    }
  }

 protected:
  virtual void Field(const PointRef& x, const Vector& theta, bool want_theta,
                     double* h, Vector* grad, Vector* dh,
                     Matrix* dgrad) const = 0;
};

class Identity : public Diffusion {
 public:
  std::string name() const override { return "identity"; }
  DiffusionForm form() const override { return DiffusionForm::kIdentity; }
  bool depends_on_theta() const override { return false; }
  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                DiffusionPoint* out) const override {
    Prepare(form(), x.size(), theta.size(), needs, out);
    out->m.setIdentity();
    out->diag.setOnes();
  }
};

// h = 1 + ||x - theta_1||^2 / theta_2^2.
class StudentLoc : public ScalarField {
 public:
  std::string name() const override { return "student_loc"; }
  bool depends_on_theta() const override { return true; }
  int theta_used(int d) const override { return d + 1; }

 protected:
  void Field(const PointRef& x, const Vector& theta, bool want_theta,
             double* h, Vector* grad, Vector* dh,
             Matrix* dgrad) const override {
    const Index d = x.size();
    const double t = theta(d);
    if (!(t > 0.0)) throw ConfigError("student_loc needs a positive scale");
    const double t2 = t * t;
    const Vector delta = x - theta.head(d);
    const double r2 = delta.squaredNorm();
    *h = 1.0 + r2 / t2;
    *grad = 2.0 * delta / t2;
    if (want_theta) {
      dh->head(d) = -2.0 * delta / t2;
      (*dh)(d) = -2.0 * r2 / (t2 * t);
      dgrad->topRows(d) = -2.0 / t2 * Matrix::Identity(d, d);
      dgrad->row(d) = -4.0 * delta.transpose() / (t2 * t);
    }
  }
};

// h = u + u^3 / nu with u = (x - theta_1) / theta_2, d = 1.
class StudentScale : public ScalarField {
 public:
  explicit StudentScale(double nu) : nu_(nu) {}
  std::string name() const override { return "student_scale"; }
  bool depends_on_theta() const override { return true; }
  int theta_used(int) const override { return 2; }
  int fixed_dim() const override { return 1; }

 protected:
  void Field(const PointRef& x, const Vector& theta, bool want_theta,
             double* h, Vector* grad, Vector* dh,
             Matrix* dgrad) const override {
    const double t = theta(1);
    if (!(t > 0.0)) throw ConfigError("student_scale needs a positive scale");
    const double u = (x(0) - theta(0)) / t;
    const double slope = 1.0 + 3.0 * u * u / nu_;
    *h = u + u * u * u / nu_;
    (*grad)(0) = slope / t;
    if (want_theta) {
      (*dh)(0) = -slope / t;
      (*dh)(1) = -u * slope / t;
      (*dgrad)(0, 0) = -6.0 * u / (nu_ * t * t);
      (*dgrad)(1, 0) = -(1.0 + 9.0 * u * u / nu_) / (t * t);
    }
  }

 private:
  double nu_;
};

// h = 1 / (1 + ||x||^alpha).
class Decay : public ScalarField {
 public:
  explicit Decay(double alpha) : alpha_(alpha) {}
  std::string name() const override { return "decay"; }
  bool depends_on_theta() const override { return false; }

 protected:
  void Field(const PointRef& x, const Vector&, bool, double* h, Vector* grad,
             Vector*, Matrix*) const override {
    const double r = x.norm();
    const double ra = std::pow(r, alpha_);
    const double den = 1.0 + ra;
    *h = 1.0 / den;
    if (r == 0.0) {
      grad->setZero();
    } else {
      *grad = (-alpha_ * ra / (r * r) / (den * den)) * x;
    }
  }

 private:
  double alpha_;
};

// Diagonal field diag(f_i(x_i)) with theta-free f.
class CoordinateDiagonal : public Diffusion {
 public:
  DiffusionForm form() const override { return DiffusionForm::kDiagonal; }
  bool depends_on_theta() const override { return false; }

  void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                DiffusionPoint* out) const override {
    const Index d = x.size();
    Prepare(form(), d, theta.size(), needs, out);
    for (Index i = 0; i < d; ++i) {
      double f = 0.0, df = 0.0;
      Coordinate(x(i), &f, &df);
      out->diag(i) = f;
      out->m(i, i) = f;
      out->div(i) = df;
      if (needs & kNeedJacobian) out->jac[i](i, i) = df;
    }
  }

 protected:
  virtual void Coordinate(double xi, double* f, double* df) const = 0;
};

class NonNeg : public CoordinateDiagonal {
 public:
  std::string name() const override { return "nonneg"; }

 protected:
  void Coordinate(double xi, double* f, double* df) const override {
    *f = xi;
    *df = 1.0;
  }
};

// f_i = 1 / (1 + x_i).
class RecipDiag : public CoordinateDiagonal {
 public:
  std::string name() const override { return "recip_diag"; }

 protected:
  void Coordinate(double xi, double* f, double* df) const override {
    const double s = 1.0 + xi;
    if (std::abs(s) < 1e-8) {
      throw NumericalError("recip_diag diffusion is singular at x_i = -1");
    }
    *f = 1.0 / s;
    *df = -1.0 / (s * s);
  }
};

}  // namespace

DiffusionPtr BuiltinDiffusion(const std::string& name, const Hyper& hyper) {
  if (name == "identity") return std::make_shared<Identity>();
  if (name == "student_loc") return std::make_shared<StudentLoc>();
  if (name == "student_scale") {
    const double nu = HyperOr(hyper, "nu", 5.0);
    if (!(nu > 0.0)) throw ConfigError("student_scale requires nu > 0");
    return std::make_shared<StudentScale>(nu);
  }
  if (name == "nonneg") return std::make_shared<NonNeg>();
  if (name == "decay") {
    const double alpha = HyperOr(hyper, "alpha", 2.0);
    if (!(alpha > 0.0)) throw ConfigError("decay requires alpha > 0");
    return std::make_shared<Decay>(alpha);
  }
  if (name == "recip_diag") return std::make_shared<RecipDiag>();
  throw ConfigError("unknown diffusion id '" + name + "'");
}

std::vector<std::string> BuiltinDiffusionIds() {
  return {"identity", "student_loc", "student_scale", "nonneg", "decay",
          "recip_diag"};
}

bool DsmThetaIndependenceCheck(const Diffusion& m, int d, int dim_theta) {
  if (d <= 0) d = m.fixed_dim() > 0 ? m.fixed_dim() : 2;
  if (dim_theta <= 0) dim_theta = std::max(d + 1, m.theta_used(d));
  Rng rng(0x5eed);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> scale(0.5, 3.0);
  DiffusionPoint p;
  for (int probe = 0; probe < 32; ++probe) {
    Vector x(d), theta(dim_theta);
    for (int i = 0; i < d; ++i) x(i) = normal(rng);
    for (int a = 0; a < dim_theta; ++a) theta(a) = normal(rng);
    theta(dim_theta - 1) = scale(rng);
    if (dim_theta > d) theta(d) = scale(rng);
    try {
      m.Evaluate(x, theta, kNeedThetaDiff, &p);
    } catch (const NumericalError&) {
      continue;
    }
    for (const Matrix& g : p.dtheta) {
      if (g.cwiseAbs().maxCoeff() != 0.0) return false;
    }
    if (p.dtheta_div.size() > 0 && p.dtheta_div.cwiseAbs().maxCoeff() != 0.0) {
      return false;
    }
  }
  return true;
}

}  // namespace steinest
