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

#include "steinest/stein_kernel.h"

#include <cmath>
#include <limits>
#include <utility>

#include "steinest/estimators.h"

namespace steinest {
namespace {

// Read-only view of m (or of one of its theta-derivatives) at a point.
struct MView {
  const SmallVec* diag = nullptr;  // set for the non-full forms
  const SmallMat* full = nullptr;  // set for the full form
};

MView ViewOf(const PointFeatures& f) {
  MView v;
  if (f.form == DiffusionForm::kFull) {
    v.full = &f.m;
  } else {
    v.diag = &f.diag;
  }
  return v;
}

// m^T g.
SmallVec MT(const MView& v, const SmallVec& g) {
  if (v.diag) return v.diag->cwiseProduct(g);
  return v.full->transpose() * g;
}

// K b at the pair.
SmallVec KTimes(const MatrixKernel& kernel, const KernelPairDerivs& kd,
                const SmallVec& b) {
  if (kernel.form() == MatrixKernel::Form::kScaled) {
    const double k = kd.parts[0].k;
    if (kernel.b_is_identity()) return k * b;
    return k * (kernel.b() * b);
  }
  SmallVec out(b.size());
  for (Index r = 0; r < b.size(); ++r) {
    out(r) = kernel.lambda()(r) * kd.parts[kernel.kernel_index(static_cast<int>(r))].k * b(r);
  }
  return out;
}

// cy_r = sum_{s,l} my_ls d/dy_l K_rs.
SmallVec CyVec(const MatrixKernel& kernel, const KernelPairDerivs& kd,
               const MView& my) {
  if (kernel.form() == MatrixKernel::Form::kScaled) {
    SmallVec v = MT(my, kd.parts[0].gy);
    if (kernel.b_is_identity()) return v;
    return kernel.b() * v;
  }
  const Index d = kernel.dim();
  SmallVec out(d);
  for (Index r = 0; r < d; ++r) {
    const SmallVec& gy = kd.parts[kernel.kernel_index(static_cast<int>(r))].gy;
    const double mg = my.diag ? (*my.diag)(r) * gy(r) : my.full->col(r).dot(gy);
    out(r) = kernel.lambda()(r) * mg;
  }
  return out;
}

// cx_s = sum_{i,r} mx_ir d/dx_i K_rs.
SmallVec CxVec(const MatrixKernel& kernel, const KernelPairDerivs& kd,
               const MView& mx) {
  if (kernel.form() == MatrixKernel::Form::kScaled) {
    SmallVec v = MT(mx, kd.parts[0].gx);
    if (kernel.b_is_identity()) return v;
    return kernel.b() * v;
  }
  const Index d = kernel.dim();
  SmallVec out(d);
  for (Index r = 0; r < d; ++r) {
    const SmallVec& gx = kd.parts[kernel.kernel_index(static_cast<int>(r))].gx;
    const double mg = mx.diag ? (*mx.diag)(r) * gx(r) : mx.full->col(r).dot(gx);
    out(r) = kernel.lambda()(r) * mg;
  }
  return out;
}

// sum mx_ir my_ls d/dx_i d/dy_l K_rs.
double Cxy(const MatrixKernel& kernel, const KernelPairDerivs& kd,
           const MView& mx, const MView& my) {
  const Index d = kernel.dim();
  if (kernel.form() == MatrixKernel::Form::kScaled) {
    const SmallMat& g = kd.parts[0].gxy;
    if (mx.diag && my.diag) {
      const SmallVec& fx = *mx.diag;
      const SmallVec& fy = *my.diag;
      if (kernel.b_is_identity()) {
        double acc = 0.0;
        for (Index r = 0; r < d; ++r) acc += fx(r) * g(r, r) * fy(r);
        return acc;
      }
      double acc = 0.0;
      for (Index r = 0; r < d; ++r) {
        for (Index s = 0; s < d; ++s) acc += kernel.b()(r, s) * fx(r) * g(r, s) * fy(s);
      }
      return acc;
    }
    SmallMat left = mx.diag ? SmallMat(mx.diag->asDiagonal() * g)
                            : SmallMat(mx.full->transpose() * g);
    SmallMat inner = my.diag ? SmallMat(left * my.diag->asDiagonal())
                             : SmallMat(left * (*my.full));
    if (kernel.b_is_identity()) return inner.trace();
    return kernel.b().cwiseProduct(inner).sum();
  }
  double acc = 0.0;
  for (Index r = 0; r < d; ++r) {
    const SmallMat& g = kd.parts[kernel.kernel_index(static_cast<int>(r))].gxy;
    double v;
    if (mx.diag && my.diag) {
      v = (*mx.diag)(r) * g(r, r) * (*my.diag)(r);
    } else {
      SmallVec col_y = my.diag ? SmallVec(my.diag->cwiseProduct(
                                     SmallVec::Unit(d, r)))
                               : SmallVec(my.full->col(r));
      SmallVec col_x = mx.diag ? SmallVec(mx.diag->cwiseProduct(
                                     SmallVec::Unit(d, r)))
                               : SmallVec(mx.full->col(r));
      v = col_x.dot(g * col_y);
    }
    acc += kernel.lambda()(r) * v;
  }
  return acc;
}

// Dense arrays of K and its derivatives at a pair.
struct DenseKernel {
  Matrix k;
  std::vector<Matrix> dx, dy;  // indexed by derivative coordinate
  std::vector<Matrix> dxy;     // index i * d + l
};

DenseKernel Materialize(const MatrixKernel& kernel, const KernelPairDerivs& kd) {
  const Index d = kernel.dim();
  DenseKernel out;
  out.k = Matrix::Zero(d, d);
  out.dx.assign(d, Matrix::Zero(d, d));
  out.dy.assign(d, Matrix::Zero(d, d));
  out.dxy.assign(d * d, Matrix::Zero(d, d));
  if (kernel.form() == MatrixKernel::Form::kScaled) {
    const KernelDerivs& p = kd.parts[0];
    const Matrix& b = kernel.b();
    out.k = p.k * b;
    for (Index i = 0; i < d; ++i) {
      out.dx[i] = p.gx(i) * b;
      out.dy[i] = p.gy(i) * b;
      for (Index l = 0; l < d; ++l) out.dxy[i * d + l] = p.gxy(i, l) * b;
    }
    return out;
  }
  for (Index r = 0; r < d; ++r) {
    const KernelDerivs& p = kd.parts[kernel.kernel_index(static_cast<int>(r))];
    const double lam = kernel.lambda()(r);
    out.k(r, r) = lam * p.k;
    for (Index i = 0; i < d; ++i) {
      out.dx[i](r, r) = lam * p.gx(i);
      out.dy[i](r, r) = lam * p.gy(i);
      for (Index l = 0; l < d; ++l) out.dxy[i * d + l](r, r) = lam * p.gxy(i, l);
    }
  }
  return out;
}

double DenseForm(const DenseKernel& dk, const Vector& tx, const Matrix& mx,
                 const Vector& ty, const Matrix& my) {
  const Index d = tx.size();
  double total = tx.dot(dk.k * ty);
  for (Index r = 0; r < d; ++r) {
    for (Index s = 0; s < d; ++s) {
      for (Index l = 0; l < d; ++l) total += tx(r) * my(l, s) * dk.dy[l](r, s);
      for (Index i = 0; i < d; ++i) total += ty(s) * mx(i, r) * dk.dx[i](r, s);
      for (Index i = 0; i < d; ++i) {
        for (Index l = 0; l < d; ++l) {
          total += mx(i, r) * my(l, s) * dk.dxy[i * d + l](r, s);
        }
      }
    }
  }
  return total;
}

Matrix FullM(const PointFeatures& f) {
  if (f.form == DiffusionForm::kFull) return f.m;
  return Matrix(f.diag.asDiagonal());
}

Matrix FullDm(const PointFeatures& f, Index a) {
  const Index d = f.x.size();
  if (!f.has_dm) return Matrix::Zero(d, d);
  if (f.form == DiffusionForm::kFull) return f.dm[a];
  return Matrix(Vector(f.ddiag.row(a).transpose()).asDiagonal());
}

}  // namespace

SteinKernelCtx::SteinKernelCtx(ModelPtr model, MatrixKernel kernel,
                               DiffusionPtr diffusion, Vector theta,
                               Sample sample, bool with_theta_derivs)
    : model_(std::move(model)),
      kernel_(std::move(kernel)),
      diffusion_(std::move(diffusion)),
      theta_(std::move(theta)),
      sample_(std::move(sample)),
      with_theta_derivs_(with_theta_derivs) {
  if (!model_ || !diffusion_) throw ConfigError("Stein kernel needs a model and a diffusion");
  model_->CheckTheta(theta_);
  if (kernel_.dim() != model_->dim_x()) {
    throw ConfigError("kernel dimension does not match the model");
  }
  if (model_->dim_theta() > kMaxDim) {
    throw ConfigError("too many parameters for the Stein kernel cache");
  }
  if (sample_.size() > 0 && sample_.dim() != model_->dim_x()) {
    throw ConfigError("sample dimension does not match the model");
  }
  cache_.resize(sample_.size());
  ParallelFor(static_cast<std::size_t>(sample_.size()), [&](std::size_t i) {
    cache_[i] = Features(sample_.point(static_cast<Index>(i)));
  });
}

PointFeatures SteinKernelCtx::Features(const PointRef& x) const {
  const Index d = model_->dim_x();
  const Index p = model_->dim_theta();
  if (x.size() != d) throw ConfigError("point dimension does not match the model");
  ModelPoint mp;
  model_->Evaluate(x, theta_, kNeedScore | (with_theta_derivs_ ? kNeedThetaScore : 0u),
                   &mp);
  DiffusionPoint dp;
  diffusion_->Evaluate(x, theta_, with_theta_derivs_ ? kNeedThetaDiff : 0u, &dp);
  PointFeatures f;
  f.x = x;
  f.form = dp.form;
  const bool full = dp.form == DiffusionForm::kFull;
  if (full) {
    f.m = dp.m;
  } else {
    f.diag = dp.diag;
  }
  const MView v = ViewOf(f);
  const SmallVec score = mp.score;
  f.t = MT(v, score) + SmallVec(dp.div);
  if (!f.t.allFinite()) throw NumericalError("non-finite Stein feature at a point");
  if (!with_theta_derivs_) return f;
  f.dt.resize(p, d);
  f.w.resize(p, d);
  for (const Matrix& g : dp.dtheta) {
    if (g.cwiseAbs().maxCoeff() != 0.0) f.has_dm = true;
  }
  if (dp.dtheta_div.size() > 0 && dp.dtheta_div.cwiseAbs().maxCoeff() != 0.0) {
    f.has_dm = true;
  }
  if (f.has_dm) {
    if (full) {
      f.dm.assign(dp.dtheta.begin(), dp.dtheta.end());
    } else {
      f.ddiag.resize(p, d);
      for (Index a = 0; a < p; ++a) f.ddiag.row(a) = dp.dtheta[a].diagonal().transpose();
    }
  }
  for (Index a = 0; a < p; ++a) {
    const SmallVec du = mp.grad_theta_score.row(a).transpose();
    const SmallVec w = MT(v, du);
    f.w.row(a) = w.transpose();
    SmallVec dt = w;
    if (f.has_dm) {
      if (full) {
        dt += f.dm[a].transpose() * score;
      } else {
        dt += f.ddiag.row(a).transpose().cwiseProduct(score);
      }
      dt += dp.dtheta_div.row(a).transpose();
    }
    f.dt.row(a) = dt.transpose();
  }
  if (!f.dt.allFinite()) throw NumericalError("non-finite Stein feature derivative");
  return f;
}

double SteinKernelCtx::Value(const PointFeatures& fx, const PointFeatures& fy,
                             KernelPairDerivs* kd) const {
  kernel_.PairDerivs(fx.x, fy.x, kd);
  const MView mx = ViewOf(fx);
  const MView my = ViewOf(fy);
  const SmallVec kty = KTimes(kernel_, *kd, fy.t);
  return fx.t.dot(kty) + fx.t.dot(CyVec(kernel_, *kd, my)) +
         CxVec(kernel_, *kd, mx).dot(fy.t) + Cxy(kernel_, *kd, mx, my);
}

double SteinKernelCtx::ValueAndGrad(const PointFeatures& fx,
                                    const PointFeatures& fy,
                                    KernelPairDerivs* kd,
                                    Eigen::Ref<Vector> grad) const {
  kernel_.PairDerivs(fx.x, fy.x, kd);
  const MView mx = ViewOf(fx);
  const MView my = ViewOf(fy);
  const SmallVec kty = KTimes(kernel_, *kd, fy.t);
  const SmallVec ktx = KTimes(kernel_, *kd, fx.t);
  const SmallVec cy = CyVec(kernel_, *kd, my);
  const SmallVec cx = CxVec(kernel_, *kd, mx);
  const double value =
      fx.t.dot(kty) + fx.t.dot(cy) + cx.dot(fy.t) + Cxy(kernel_, *kd, mx, my);
  grad.noalias() = fx.dt * (kty + cy) + fy.dt * (ktx + cx);
  if (fx.has_dm || fy.has_dm) {
    const Index p = grad.size();
    for (Index a = 0; a < p; ++a) {
      double extra = 0.0;
      if (fx.has_dm) {
        SmallVec dd;
        MView dmx;
        if (fx.form == DiffusionForm::kFull) {
          dmx.full = &fx.dm[a];
        } else {
          dd = fx.ddiag.row(a).transpose();
          dmx.diag = &dd;
        }
        extra += CxVec(kernel_, *kd, dmx).dot(fy.t) + Cxy(kernel_, *kd, dmx, my);
      }
      if (fy.has_dm) {
        SmallVec dd;
        MView dmy;
        if (fy.form == DiffusionForm::kFull) {
          dmy.full = &fy.dm[a];
        } else {
          dd = fy.ddiag.row(a).transpose();
          dmy.diag = &dd;
        }
        extra += fx.t.dot(CyVec(kernel_, *kd, dmy)) + Cxy(kernel_, *kd, mx, dmy);
      }
      grad(a) += extra;
    }
  }
  return value;
}

void SteinKernelCtx::InfoTerm(const PointFeatures& fx, const PointFeatures& fy,
                              const KernelPairDerivs& kd,
                              Eigen::Ref<Matrix> out) const {
  const Index p = fx.w.rows();
  const Index d = fx.w.cols();
  SmallMat kw(d, p);
  for (Index b = 0; b < p; ++b) {
    kw.col(b) = KTimes(kernel_, kd, SmallVec(fy.w.row(b).transpose()));
  }
  out.noalias() = fx.w * kw;
}

double SteinKernelCtx::ValueDense(const PointFeatures& fx,
                                  const PointFeatures& fy) const {
  KernelPairDerivs kd;
  kernel_.PairDerivs(fx.x, fy.x, &kd);
  const DenseKernel dk = Materialize(kernel_, kd);
  return DenseForm(dk, Vector(fx.t), FullM(fx), Vector(fy.t), FullM(fy));
}

Vector SteinKernelCtx::GradDense(const PointFeatures& fx,
                                 const PointFeatures& fy) const {
  if (!with_theta_derivs_) throw ConfigError("context built without theta derivatives");
  KernelPairDerivs kd;
  kernel_.PairDerivs(fx.x, fy.x, &kd);
  const DenseKernel dk = Materialize(kernel_, kd);
  const Index p = dim_theta();
  const Matrix mx = FullM(fx);
  const Matrix my = FullM(fy);
  const Vector tx = fx.t;
  const Vector ty = fy.t;
  Vector grad(p);
  for (Index a = 0; a < p; ++a) {
    const Vector dtx = fx.dt.row(a).transpose();
    const Vector dty = fy.dt.row(a).transpose();
    grad(a) = DenseForm(dk, dtx, FullDm(fx, a), ty, my) +
              DenseForm(dk, tx, mx, dty, FullDm(fy, a));
  }
  return grad;
}

void ContractPair(const MatrixKernel& kernel, const PointFeatures& fx,
                  const PointFeatures& fy, KernelPairDerivs* kd,
                  PairContraction* out) {
  kernel.PairDerivs(fx.x, fy.x, kd);
  const MView mx = ViewOf(fx);
  const MView my = ViewOf(fy);
  const Index d = kernel.dim();
  out->k.resize(d, d);
  for (Index s = 0; s < d; ++s) {
    out->k.col(s) = KTimes(kernel, *kd, SmallVec::Unit(d, s));
  }
  out->cx = CxVec(kernel, *kd, mx);
  out->cy = CyVec(kernel, *kd, my);
  out->cxy = Cxy(kernel, *kd, mx, my);
}

double SteinKernel(const SteinKernelCtx& ctx, const PointRef& x,
                   const PointRef& y) {
  KernelPairDerivs kd;
  return ctx.Value(ctx.Features(x), ctx.Features(y), &kd);
}

Vector SteinKernelGradTheta(const SteinKernelCtx& ctx, const PointRef& x,
                            const PointRef& y) {
  if (!ctx.with_theta_derivs()) throw ConfigError("context built without theta derivatives");
  KernelPairDerivs kd;
  Vector grad(ctx.dim_theta());
  ctx.ValueAndGrad(ctx.Features(x), ctx.Features(y), &kd, grad);
  return grad;
}

Vector SteinKernelGradThetaFd(const ModelPtr& model, const MatrixKernel& kernel,
                              const DiffusionPtr& diffusion, const Vector& theta,
                              const PointRef& x, const PointRef& y) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const Index p = theta.size();
  Vector grad(p);
  for (Index a = 0; a < p; ++a) {
    const double h = std::cbrt(eps) * std::max(1.0, std::abs(theta(a)));
    Vector tp = theta, tm = theta;
    tp(a) += h;
    tm(a) -= h;
    SteinKernelCtx cp(model, kernel, diffusion, tp, Sample(), false);
    SteinKernelCtx cm(model, kernel, diffusion, tm, Sample(), false);
    grad(a) = (SteinKernel(cp, x, y) - SteinKernel(cm, x, y)) / (2.0 * h);
  }
  return grad;
}

std::vector<double> DsmLimitCheck(const ModelPtr& model, const Vector& theta,
                                  const DiffusionPtr& diffusion,
                                  const KnownDensity& q, const Sample& sample,
                                  const std::vector<double>& gammas,
                                  DsmLimitForm form) {
  const Index n = sample.size();
  if (n < 2) throw ConfigError("the limit check needs at least two points");
  const int d = model->dim_x();
  CompensatedSum dsm;
  std::vector<Vector> w(n);
  for (Index i = 0; i < n; ++i) {
    const auto x = sample.point(i);
    if (!std::isfinite(q.log_pdf(x))) {
      throw NumericalError("reference density vanishes at a sample point");
    }
    const Matrix m = diffusion->Eval(x, theta);
    w[i] = m.transpose() * (model->Score(x, theta) - q.score(x));
    dsm.Add(w[i].squaredNorm());
  }
  const double dsm_value = dsm.value() / static_cast<double>(n);
  std::vector<double> gaps;
  for (double gamma : gammas) {
    const ScalarKernelPtr kq = DensityWeightedGaussianKernel(gamma, q);
    double dksd;
    if (form == DsmLimitForm::kSteinKernel) {
      SteinKernelCtx ctx(model, MatrixKernel::ScaledIdentity(d, kq), diffusion, theta,
                         sample, false);
      dksd = DksdLoss(ctx);
    } else {
      std::vector<CompensatedSum> rows(n);
      ParallelFor(static_cast<std::size_t>(n), [&](std::size_t i) {
        for (Index j = static_cast<Index>(i) + 1; j < n; ++j) {
          rows[i].Add(kq->Eval(sample.point(static_cast<Index>(i)), sample.point(j)) *
                      w[i].dot(w[j]));
        }
      });
      CompensatedSum total;
      for (const CompensatedSum& r : rows) total.Add(r);
      dksd = 2.0 * total.value() / (static_cast<double>(n) * static_cast<double>(n - 1));
    }
    gaps.push_back(std::abs(dksd - dsm_value));
  }
  return gaps;
}

}  // namespace steinest
