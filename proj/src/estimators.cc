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

#include "steinest/estimators.h"

#include <cmath>

namespace steinest {
namespace {

Index BlockCount(Index n) { return (n + kReductionBlock - 1) / kReductionBlock; }

struct PairAccum {
  CompensatedSum value;
  CompensatedArray grad;
  CompensatedArray info;
};

void RequireSample(Index n, Index minimum) {
  if (n < minimum) {
    throw ConfigError("need at least " + std::to_string(minimum) +
                      " sample points, got " + std::to_string(n));
  }
}

}  // namespace

std::vector<int> AllCoordinates(int m) {
  std::vector<int> idx(m);
  for (int a = 0; a < m; ++a) idx[a] = a;
  return idx;
}

Vector SubVector(const Vector& v, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) out(a) = v(idx[a]);
  return out;
}

Matrix SubMatrix(const Matrix& a, const std::vector<int>& idx) {
  Matrix out(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = a(idx[i], idx[j]);
  }
  return out;
}

LossReport DksdEvaluate(const SteinKernelCtx& ctx, unsigned wants) {
  const Index n = ctx.sample().size();
  RequireSample(n, 2);
  const bool want_grad = (wants & kWantGrad) != 0;
  const bool want_info = (wants & kWantInfo) != 0;
  if ((want_grad || want_info) && !ctx.with_theta_derivs()) {
    throw ConfigError("context built without theta derivatives");
  }
  const Index p = ctx.dim_theta();
  const Index blocks = BlockCount(n);
  std::vector<PairAccum> acc(blocks);
  ParallelFor(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    PairAccum& a = acc[b];
    if (want_grad) a.grad.Resize(p);
    if (want_info) a.info.Resize(p * p);
    KernelPairDerivs kd;
    Vector g(p);
    Matrix t1(p, p), t2(p, p);
    const Index lo = static_cast<Index>(b) * kReductionBlock;
    const Index hi = std::min(n, lo + kReductionBlock);
    for (Index i = lo; i < hi; ++i) {
      const PointFeatures& fi = ctx.cached(i);
      for (Index j = i + 1; j < n; ++j) {
        const PointFeatures& fj = ctx.cached(j);
        double v;
        if (want_grad) {
          v = ctx.ValueAndGrad(fi, fj, &kd, g);
          a.grad.Add(g);
        } else {
          v = ctx.Value(fi, fj, &kd);
        }
        if (!std::isfinite(v)) throw NumericalError("non-finite Stein kernel value");
        a.value.Add(v);
        if (want_info) {
          ctx.InfoTerm(fi, fj, kd, t1);
          ctx.InfoTerm(fj, fi, kd, t2);
          a.info.Add(t1);
          a.info.Add(t2);
        }
      }
    }
  });
  PairAccum total;
  if (want_grad) total.grad.Resize(p);
  if (want_info) total.info.Resize(p * p);
  for (const PairAccum& a : acc) {
    total.value.Add(a.value);
    if (want_grad) total.grad.Add(a.grad);
    if (want_info) total.info.Add(a.info);
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  LossReport report;
  report.n_used = n;
  report.value = 2.0 * total.value.value() / pairs;
  if (want_grad) {
    Vector g = 2.0 * total.grad.Value(p, 1).col(0) / pairs;
    if (!g.allFinite()) throw NumericalError("non-finite DKSD gradient");
    report.grad = std::move(g);
  }
  if (want_info) report.info = Symmetrize(total.info.Value(p, p) / pairs);
  return report;
}

double DksdLoss(const SteinKernelCtx& ctx) {
  return DksdEvaluate(ctx, kWantValue).value;
}

Vector DksdGrad(const SteinKernelCtx& ctx) {
  return *DksdEvaluate(ctx, kWantGrad).grad;
}

Matrix DksdInfoMatrix(const SteinKernelCtx& ctx) {
  return *DksdEvaluate(ctx, kWantInfo).info;
}

Matrix DksdRowMeanGrads(const SteinKernelCtx& ctx) {
  const Index n = ctx.sample().size();
  RequireSample(n, 2);
  const Index p = ctx.dim_theta();
  Matrix out(n, p);
  ParallelFor(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const Index i = static_cast<Index>(ii);
    KernelPairDerivs kd;
    Vector g(p);
    CompensatedArray acc(p);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      ctx.ValueAndGrad(ctx.cached(i), ctx.cached(j), &kd, g);
      acc.Add(g);
    }
    out.row(i) = acc.Value(p, 1).col(0).transpose() / static_cast<double>(n - 1);
  });
  return out;
}

Vector DksdPointMeanGrad(const SteinKernelCtx& ctx, const PointRef& z) {
  const Index n = ctx.sample().size();
  RequireSample(n, 1);
  const Index p = ctx.dim_theta();
  const PointFeatures fz = ctx.Features(z);
  KernelPairDerivs kd;
  Vector g(p);
  CompensatedArray acc(p);
  for (Index j = 0; j < n; ++j) {
    ctx.ValueAndGrad(fz, ctx.cached(j), &kd, g);
    acc.Add(g);
  }
  return acc.Value(p, 1).col(0) / static_cast<double>(n);
}

DsmPointTerms DsmPoint(const Model& model, const Diffusion& m,
                       const Vector& theta, const PointRef& x, unsigned wants) {
  const bool want_grad = (wants & kWantGrad) != 0;
  const bool want_info = (wants & kWantInfo) != 0;
  const Index p = theta.size();
  ModelPoint mp;
  unsigned needs = kNeedScore | kNeedHess;
  if (want_grad || want_info) needs |= kNeedThetaScore;
  if (want_grad) needs |= kNeedThetaHess;
  model.Evaluate(x, theta, needs, &mp);
  DiffusionPoint dp;
  m.Evaluate(x, theta, kNeedJacobian, &dp);
  const Matrix s = MMTFromPoint(dp);
  const Vector div_s = DivMMTFromPoint(dp);
  const Vector ms = dp.m.transpose() * mp.score;
  DsmPointTerms out;
  out.value = ms.squaredNorm() + 2.0 * div_s.dot(mp.score) +
              2.0 * s.cwiseProduct(mp.hess).sum();
  if (!std::isfinite(out.value)) throw NumericalError("non-finite DSM integrand");
  if (want_grad || want_info) {
    const Matrix w = mp.grad_theta_score * dp.m;  // row a = (m^T ds_a)^T
    if (want_grad) {
      out.grad.resize(p);
      for (Index a = 0; a < p; ++a) {
        out.grad(a) = 2.0 * ms.dot(w.row(a).transpose()) +
                      2.0 * div_s.dot(mp.grad_theta_score.row(a).transpose()) +
                      2.0 * s.cwiseProduct(mp.grad_theta_hess[a]).sum();
      }
    }
    if (want_info) out.info = w * w.transpose();
  }
  return out;
}

LossReport DsmEvaluate(const Model& model, const Diffusion& m,
                       const Vector& theta, const Sample& sample,
                       unsigned wants) {
  if (m.depends_on_theta()) {
    throw ConfigError("DSM needs a diffusion that does not depend on theta; '" +
                      m.name() + "' does");
  }
  model.CheckTheta(theta);
  const Index n = sample.size();
  RequireSample(n, 1);
  if (sample.dim() != model.dim_x()) {
    throw ConfigError("sample dimension does not match the model");
  }
  const Index p = theta.size();
  const bool want_grad = (wants & kWantGrad) != 0;
  const bool want_info = (wants & kWantInfo) != 0;
  const Index blocks = BlockCount(n);
  std::vector<PairAccum> acc(blocks);
  ParallelFor(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    PairAccum& a = acc[b];
    if (want_grad) a.grad.Resize(p);
    if (want_info) a.info.Resize(p * p);
    const Index lo = static_cast<Index>(b) * kReductionBlock;
    const Index hi = std::min(n, lo + kReductionBlock);
    for (Index i = lo; i < hi; ++i) {
      const DsmPointTerms t = DsmPoint(model, m, theta, sample.point(i), wants);
      a.value.Add(t.value);
      if (want_grad) a.grad.Add(t.grad);
      if (want_info) a.info.Add(t.info);
    }
  });
  PairAccum total;
  if (want_grad) total.grad.Resize(p);
  if (want_info) total.info.Resize(p * p);
  for (const PairAccum& a : acc) {
    total.value.Add(a.value);
    if (want_grad) total.grad.Add(a.grad);
    if (want_info) total.info.Add(a.info);
  }
  const double dn = static_cast<double>(n);
  LossReport report;
  report.n_used = n;
  report.value = total.value.value() / dn;
  if (want_grad) {
    Vector g = total.grad.Value(p, 1).col(0) / dn;
    if (!g.allFinite()) throw NumericalError("non-finite DSM gradient");
    report.grad = std::move(g);
  }
  if (want_info) report.info = Symmetrize(total.info.Value(p, p) / dn);
  return report;
}

double DsmLoss(const Model& model, const Diffusion& m, const Vector& theta,
               const Sample& sample) {
  return DsmEvaluate(model, m, theta, sample, kWantValue).value;
}

Vector DsmGrad(const Model& model, const Diffusion& m, const Vector& theta,
               const Sample& sample) {
  return *DsmEvaluate(model, m, theta, sample, kWantGrad).grad;
}

Matrix DsmInfoMatrix(const Model& model, const Diffusion& m,
                     const Vector& theta, const Sample& sample) {
  return *DsmEvaluate(model, m, theta, sample, kWantInfo).info;
}

double SmLoss(const Model& model, const Vector& theta, const Sample& sample) {
  model.CheckTheta(theta);
  const Index n = sample.size();
  RequireSample(n, 1);
  CompensatedSum acc;
  ModelPoint mp;
  for (Index i = 0; i < n; ++i) {
    model.Evaluate(sample.point(i), theta, kNeedScore | kNeedHess, &mp);
    acc.Add(mp.hess.trace() + 0.5 * mp.score.squaredNorm());
  }
  return acc.value() / static_cast<double>(n);
}

Matrix SandwichCovarianceDksd(const SteinKernelCtx& ctx, double lambda_rel,
                              const std::vector<int>& free) {
  const std::vector<int> idx = free.empty() ? AllCoordinates(ctx.dim_theta()) : free;
  const Matrix g = SubMatrix(DksdInfoMatrix(ctx), idx);
  const Matrix rows = DksdRowMeanGrads(ctx);
  const Index n = rows.rows();
  Matrix h(n, static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) h.col(a) = rows.col(idx[a]);
  const Matrix sigma = h.transpose() * h / static_cast<double>(n);
  const Matrix left = RegularizedSolve(g, sigma, lambda_rel);
  const Matrix cov = RegularizedSolve(g, Matrix(left.transpose()), lambda_rel);
  return Symmetrize(cov);
}

Matrix SandwichCovarianceDsm(const Model& model, const Diffusion& m,
                             const Vector& theta, const Sample& sample,
                             double lambda_rel, const std::vector<int>& free) {
  const std::vector<int> idx = free.empty() ? AllCoordinates(model.dim_theta()) : free;
  const Index n = sample.size();
  RequireSample(n, 1);
  const Index q = static_cast<Index>(idx.size());
  Matrix h(n, q);
  ParallelFor(static_cast<std::size_t>(n), [&](std::size_t i) {
    const DsmPointTerms t =
        DsmPoint(model, m, theta, sample.point(static_cast<Index>(i)), kWantGrad);
    h.row(static_cast<Index>(i)) = SubVector(t.grad, idx).transpose();
  });
  const Matrix sigma = h.transpose() * h / static_cast<double>(n);
  // The loss Hessian at the optimum is twice the information matrix.
  const Matrix hess = 2.0 * SubMatrix(DsmInfoMatrix(model, m, theta, sample), idx);
  const Matrix left = RegularizedSolve(hess, sigma, lambda_rel);
  const Matrix cov = RegularizedSolve(hess, Matrix(left.transpose()), lambda_rel);
  return Symmetrize(cov);
}

}  // namespace steinest
