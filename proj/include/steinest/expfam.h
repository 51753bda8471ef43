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

#ifndef STEINEST_EXPFAM_H_
#define STEINEST_EXPFAM_H_

#include <memory>
#include <string>
#include <vector>

#include "steinest/common.h"
#include "steinest/diffusion.h"
#include "steinest/kernel.h"
#include "steinest/model.h"

namespace steinest {

// Natural exponential family log p(x) = <theta, T(x)> + b(x) + const.
class ExpFamSpec {
 public:
  virtual ~ExpFamSpec() = default;
  virtual std::string name() const = 0;
  virtual int dim_x() const = 0;
  virtual int dim_stat() const = 0;
  virtual std::vector<ParamDomain> theta_domain() const {
    return std::vector<ParamDomain>(dim_stat());
  }

  virtual Vector Stat(const PointRef& x) const = 0;
  virtual Matrix GradStat(const PointRef& x) const = 0;  // m x d
  virtual std::vector<Matrix> HessStat(const PointRef& x) const = 0;
  virtual double Base(const PointRef& x) const = 0;
  virtual Vector GradBase(const PointRef& x) const = 0;
  virtual Matrix HessBase(const PointRef& x) const = 0;
};

using ExpFamPtr = std::shared_ptr<const ExpFamSpec>;

// Ids: gaussian_natural (T = (x, -||x||^2/2)), gaussian_location (T = 2x,
// b = -||x||^2) and intractable_expfam (d = 6; T = tanh(x_5), b a fixed
// quadratic form plus 0.6 tanh(x_1)).
ExpFamPtr BuiltinExpFam(const std::string& name, const Hyper& hyper = {});
std::vector<std::string> BuiltinExpFamIds();

ModelPtr ExpFamModel(ExpFamPtr spec);

// theta^T a theta + v^T theta + c.
struct QuadraticForm {
  Matrix a;
  Vector v;
  double c = 0.0;
  double Eval(const Vector& theta) const { return theta.dot(a * theta) + v.dot(theta) + c; }
  Vector Grad(const Vector& theta) const { return 2.0 * a * theta + v; }
};

// The DKSD U-statistic as an exact quadratic in theta.
QuadraticForm DksdQuadratic(const ExpFamSpec& spec, const MatrixKernel& kernel,
                            const Diffusion& m, const Sample& sample);
// The DSM loss as an exact quadratic in theta.
QuadraticForm DsmQuadratic(const ExpFamSpec& spec, const Diffusion& m,
                           const Sample& sample);

// -a^{-1} v / 2 after symmetrizing a; throws NumericalError when a is not
// safely positive definite.
Vector SolveQuadratic(const QuadraticForm& q);

enum class LossKind { kDksd, kDsm };

// Delta-method covariance of sqrt(n) (theta_hat - theta) for the closed-form
// estimator. `kernel` is ignored for kDsm.
Matrix ExpFamAsymptoticCov(LossKind kind, const ExpFamSpec& spec,
                           const MatrixKernel* kernel, const Diffusion& m,
                           const Sample& sample);

}  // namespace steinest

#endif  // STEINEST_EXPFAM_H_
