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

#ifndef STEINEST_ROBUST_H_
#define STEINEST_ROBUST_H_

#include <string>
#include <vector>

#include "steinest/common.h"
#include "steinest/diffusion.h"
#include "steinest/estimators.h"
#include "steinest/model.h"
#include "steinest/stein_kernel.h"

namespace steinest {

// Influence of a point mass at z on the fitted parameter, with the
// population integrals replaced by sample means at the context's theta
// (which should be the fit). `free` restricts to fitted coordinates when
// the others were held fixed; empty means all.
//   DKSD: -g^{-1} (1/n) sum_j grad_theta k0(z, X_j)
//   DSM:  -(2 g)^{-1} grad_theta F(z)
// The sign follows the derivative of theta_hat along (1 - eps) Q_n + eps delta_z.
Vector InfluenceDksd(const SteinKernelCtx& ctx, const PointRef& z,
                     double ridge = kDefaultRidge, const std::vector<int>& free = {});
Vector InfluenceDsm(const Model& model, const Diffusion& m, const Vector& theta,
                    const Sample& sample, const PointRef& z,
                    double ridge = kDefaultRidge, const std::vector<int>& free = {});

struct InfluenceRow {
  Vector z;
  Vector value;  // NaN entries on failure
  double norm = 0.0;
  bool ok = false;
};

enum class InfluenceKind { kDksd, kDsm, kSm };

// Influence over a grid of points. For kDksd `ctx` must be set; the other
// kinds read model, m (ignored for kSm), theta and sample. The metric is
// factorized once for the whole grid.
struct InfluenceInputs {
  InfluenceKind kind = InfluenceKind::kDsm;
  const SteinKernelCtx* ctx = nullptr;
  ModelPtr model;
  DiffusionPtr m;
  Vector theta;
  const Sample* sample = nullptr;
  double ridge = kDefaultRidge;
  std::vector<int> free;
};
std::vector<InfluenceRow> InfluenceCurve(const InfluenceInputs& in,
                                         const std::vector<Vector>& zs);

// Columns z_0.., if_0.., if_norm.
std::string InfluenceCsv(const std::vector<InfluenceRow>& rows);

}  // namespace steinest

#endif  // STEINEST_ROBUST_H_
