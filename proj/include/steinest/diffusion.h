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

#ifndef STEINEST_DIFFUSION_H_
#define STEINEST_DIFFUSION_H_

#include <memory>
#include <string>
#include <vector>

#include "steinest/common.h"
#include "steinest/model.h"

namespace steinest {

enum class DiffusionForm { kIdentity, kScalar, kDiagonal, kFull };

enum DiffusionNeeds : unsigned {
  kNeedJacobian = 1u,   // x-derivatives of every entry
  kNeedThetaDiff = 2u,  // theta-derivatives of m and of div m
};

// The diffusion matrix m(x; theta) at one point.
struct DiffusionPoint {
  DiffusionForm form = DiffusionForm::kIdentity;
  Matrix m;                     // d x d
  Vector diag;                  // diagonal of m for the non-full forms
  Vector div;                   // entry j = sum_i d/dx_i m_ij
  std::vector<Matrix> jac;      // jac[k] = d/dx_k m
  std::vector<Matrix> dtheta;   // dtheta[a] = d/dtheta_a m
  Matrix dtheta_div;            // (a, j) = d/dtheta_a div_j
};

class Diffusion {
 public:
  virtual ~Diffusion() = default;
  virtual std::string name() const = 0;
  virtual DiffusionForm form() const = 0;
  // Whether m is declared to vary with theta.
  virtual bool depends_on_theta() const = 0;
  // Number of theta coordinates the field reads, given the point dimension.
  virtual int theta_used(int d) const { (void)d; return 0; }
  // Required point dimension, or 0 when any dimension works.
  virtual int fixed_dim() const { return 0; }

  // Fills m, diag and div always, the other slots as requested. `theta` has
  // the model's parameter length; derivatives are reported for all of it.
  virtual void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                        DiffusionPoint* out) const = 0;

  Matrix Eval(const PointRef& x, const Vector& theta) const;
  Vector DivX(const PointRef& x, const Vector& theta) const;
  std::vector<Matrix> GradTheta(const PointRef& x, const Vector& theta) const;
  Matrix GradThetaDivX(const PointRef& x, const Vector& theta) const;
  Matrix MMT(const PointRef& x, const Vector& theta) const;
  // Entry j = sum_i d/dx_i (m m^T)_ij.
  Vector DivMMT(const PointRef& x, const Vector& theta) const;
};

using DiffusionPtr = std::shared_ptr<const Diffusion>;

// m m^T and its divergence from an evaluated point carrying the Jacobian.
Matrix MMTFromPoint(const DiffusionPoint& p);
Vector DivMMTFromPoint(const DiffusionPoint& p);

// Ids: identity, student_loc, student_scale (nu), nonneg, decay (alpha),
// recip_diag.
DiffusionPtr BuiltinDiffusion(const std::string& name, const Hyper& hyper = {});
std::vector<std::string> BuiltinDiffusionIds();

// Probes d/dtheta m at random points and parameters; true when it is zero
// everywhere on the probe set.
bool DsmThetaIndependenceCheck(const Diffusion& m, int d = 0, int dim_theta = 0);

}  // namespace steinest

#endif  // STEINEST_DIFFUSION_H_
