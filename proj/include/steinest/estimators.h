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

#ifndef STEINEST_ESTIMATORS_H_
#define STEINEST_ESTIMATORS_H_

#include <optional>
#include <vector>

#include "steinest/common.h"
#include "steinest/diffusion.h"
#include "steinest/model.h"
#include "steinest/stein_kernel.h"

namespace steinest {

enum LossWants : unsigned {
  kWantValue = 1u,
  kWantGrad = 2u,
  kWantInfo = 4u,
};

// Default relative ridge added to information matrices before solving.
inline constexpr double kDefaultRidge = 1e-6;

struct LossReport {
  double value = 0.0;
  std::optional<Vector> grad;
  std::optional<Matrix> info;
  Index n_used = 0;
};

// U-statistic (1/(n(n-1))) sum_{i != j} k0(X_i, X_j) over the context's
// sample, with optional theta-gradient and plug-in information matrix.
LossReport DksdEvaluate(const SteinKernelCtx& ctx, unsigned wants);
double DksdLoss(const SteinKernelCtx& ctx);
Vector DksdGrad(const SteinKernelCtx& ctx);
Matrix DksdInfoMatrix(const SteinKernelCtx& ctx);

// Row i = (1/(n-1)) sum_{j != i} grad_theta k0(X_i, X_j).
Matrix DksdRowMeanGrads(const SteinKernelCtx& ctx);
// (1/n) sum_j grad_theta k0(z, X_j) for an arbitrary point z.
Vector DksdPointMeanGrad(const SteinKernelCtx& ctx, const PointRef& z);

// Per-point diffusion score matching integrand
//   F(x) = ||m^T s||^2 + 2 <div(m m^T), s> + 2 tr(m m^T H)
// with s, H the score and Hessian of log p.
struct DsmPointTerms {
  double value = 0.0;
  Vector grad;   // d/dtheta F
  Matrix info;   // Gram of the rows of m^T d/dtheta s
};
DsmPointTerms DsmPoint(const Model& model, const Diffusion& m,
                       const Vector& theta, const PointRef& x, unsigned wants);

// Sample mean of F; m must not depend on theta.
LossReport DsmEvaluate(const Model& model, const Diffusion& m,
                       const Vector& theta, const Sample& sample,
                       unsigned wants);
double DsmLoss(const Model& model, const Diffusion& m, const Vector& theta,
               const Sample& sample);
Vector DsmGrad(const Model& model, const Diffusion& m, const Vector& theta,
               const Sample& sample);
Matrix DsmInfoMatrix(const Model& model, const Diffusion& m,
                     const Vector& theta, const Sample& sample);

// Score matching (1/n) sum (laplacian log p + ||s||^2 / 2). Equals half the
// DSM loss with m = I.
double SmLoss(const Model& model, const Vector& theta, const Sample& sample);

// Asymptotic covariance of sqrt(n) (theta_hat - theta) from plug-in
// estimates at theta. `free` restricts to a subset of coordinates (empty
// means all); the result is |free| x |free|.
Matrix SandwichCovarianceDksd(const SteinKernelCtx& ctx,
                              double lambda_rel = kDefaultRidge,
                              const std::vector<int>& free = {});
Matrix SandwichCovarianceDsm(const Model& model, const Diffusion& m,
                             const Vector& theta, const Sample& sample,
                             double lambda_rel = kDefaultRidge,
                             const std::vector<int>& free = {});

// Helpers for coordinate subsets.
std::vector<int> AllCoordinates(int m);
Vector SubVector(const Vector& v, const std::vector<int>& idx);
Matrix SubMatrix(const Matrix& a, const std::vector<int>& idx);

}  // namespace steinest

#endif  // STEINEST_ESTIMATORS_H_
