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

#ifndef STEINEST_STEIN_KERNEL_H_
#define STEINEST_STEIN_KERNEL_H_

#include <vector>

#include "steinest/common.h"
#include "steinest/diffusion.h"
#include "steinest/kernel.h"
#include "steinest/model.h"

namespace steinest {

// Per-point quantities entering the Stein kernel at a fixed theta.
struct PointFeatures {
  SmallVec x;
  DiffusionForm form = DiffusionForm::kIdentity;
  SmallVec diag;   // diagonal of m for the non-full forms
  SmallMat m;      // full m (only for the full form)
  SmallVec t;      // m^T score + div m
  // theta derivatives, p = dim theta
  SmallMat dt;     // p x d, row a = d/dtheta_a t
  bool has_dm = false;
  SmallMat ddiag;  // p x d, d/dtheta_a of diag (non-full forms)
  std::vector<SmallMat> dm;  // full form only
  SmallMat w;      // p x d, row a = m^T d/dtheta_a score
};

// Everything needed to evaluate the Stein kernel of (model, K, m) at theta,
// with features cached for a sample. Immutable after construction.
class SteinKernelCtx {
 public:
  SteinKernelCtx(ModelPtr model, MatrixKernel kernel, DiffusionPtr diffusion,
                 Vector theta, Sample sample, bool with_theta_derivs = true);

  const Model& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }
  const MatrixKernel& kernel() const { return kernel_; }
  const DiffusionPtr& diffusion() const { return diffusion_; }
  const Vector& theta() const { return theta_; }
  const Sample& sample() const { return sample_; }
  bool with_theta_derivs() const { return with_theta_derivs_; }
  int dim() const { return model_->dim_x(); }
  int dim_theta() const { return model_->dim_theta(); }

  const PointFeatures& cached(Index i) const { return cache_[i]; }
  PointFeatures Features(const PointRef& x) const;

  // Specialized evaluation at a pair of feature sets. `kd` is scratch space.
  double Value(const PointFeatures& fx, const PointFeatures& fy,
               KernelPairDerivs* kd) const;
  // Value and theta-gradient; `grad` must have length dim_theta().
  double ValueAndGrad(const PointFeatures& fx, const PointFeatures& fy,
                      KernelPairDerivs* kd, Eigen::Ref<Vector> grad) const;
  // Pair contribution w_a(x)^T K w_b(y) to the information matrix.
  void InfoTerm(const PointFeatures& fx, const PointFeatures& fy,
                const KernelPairDerivs& kd, Eigen::Ref<Matrix> out) const;

  // Reference evaluation that materializes K and its derivatives as dense
  // arrays and contracts them with full matrices.
  double ValueDense(const PointFeatures& fx, const PointFeatures& fy) const;
  Vector GradDense(const PointFeatures& fx, const PointFeatures& fy) const;

 private:
  ModelPtr model_;
  MatrixKernel kernel_;
  DiffusionPtr diffusion_;
  Vector theta_;
  Sample sample_;
  bool with_theta_derivs_;
  std::vector<PointFeatures> cache_;
};

// Kernel contractions at a pair for the diffusion values stored in fx, fy
// (only x, form, diag and m are read): K(x, y), cx_s = sum mx_ir d/dx_i K_rs,
// cy_r = sum my_ls d/dy_l K_rs and cxy = sum mx_ir my_ls d/dx_i d/dy_l K_rs.
struct PairContraction {
  SmallMat k;
  SmallVec cx;
  SmallVec cy;
  double cxy = 0.0;
};
void ContractPair(const MatrixKernel& kernel, const PointFeatures& fx,
                  const PointFeatures& fy, KernelPairDerivs* kd,
                  PairContraction* out);

// k0(x, y) and its theta-gradient at arbitrary points.
double SteinKernel(const SteinKernelCtx& ctx, const PointRef& x, const PointRef& y);
Vector SteinKernelGradTheta(const SteinKernelCtx& ctx, const PointRef& x,
                            const PointRef& y);
// Central differences of k0 in theta, for models without theta-derivatives.
Vector SteinKernelGradThetaFd(const ModelPtr& model, const MatrixKernel& kernel,
                              const DiffusionPtr& diffusion, const Vector& theta,
                              const PointRef& x, const PointRef& y);

// How DsmLimitCheck estimates DKSD^2 under the density-weighted kernel.
//   kScoreDifference: U-statistic of w(x)^T K(x, y) w(y) with
//     w = m^T (score_p - score_q). Same expectation as the Stein kernel form
//     by the Stein identity for q.
//   kSteinKernel: the k0 U-statistic. Its variance is unbounded here because
//     of the 1/sqrt(q(x) q(y)) weight and grows like gamma^-5.
enum class DsmLimitForm { kScoreDifference, kSteinKernel };

// |DKSD^2 - DSM| on a fixed sample for the density-weighted Gaussian kernel
// at each bandwidth, with the sample drawn from the known density q. The DSM
// value is the plug-in (1/n) sum ||m^T (score_p - score_q)||^2.
std::vector<double> DsmLimitCheck(const ModelPtr& model, const Vector& theta,
                                  const DiffusionPtr& diffusion,
                                  const KnownDensity& q, const Sample& sample,
                                  const std::vector<double>& gammas,
                                  DsmLimitForm form = DsmLimitForm::kScoreDifference);

}  // namespace steinest

#endif  // STEINEST_STEIN_KERNEL_H_
