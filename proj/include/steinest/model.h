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

#ifndef STEINEST_MODEL_H_
#define STEINEST_MODEL_H_

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "steinest/common.h"

namespace steinest {

// Named real-valued hyperparameters (s, nu, d, ...).
using Hyper = std::map<std::string, double>;

double HyperOr(const Hyper& hyper, const std::string& key, double fallback);
int HyperDim(const Hyper& hyper, int fallback);

// Open interval (lo, hi) for one parameter coordinate.
struct ParamDomain {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool Contains(double v) const { return v > lo && v < hi; }
  bool IsPositiveHalfLine() const {
    return lo == 0.0 && hi == std::numeric_limits<double>::infinity();
  }
};

enum ModelNeeds : unsigned {
  kNeedScore = 1u,
  kNeedHess = 2u,
  kNeedThetaScore = 4u,
  kNeedThetaHess = 8u,
  kNeedAll = 15u,
};

// Derivatives of log p_theta at a point. Only the slots requested through
// ModelNeeds are filled.
struct ModelPoint {
  Vector score;                          // d
  Matrix hess;                           // d x d
  Matrix grad_theta_score;               // m x d, row a = d/dtheta_a score
  std::vector<Matrix> grad_theta_hess;   // m entries of d x d
};

// Unnormalized parametric density with analytic derivatives.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual int dim_x() const = 0;
  virtual int dim_theta() const = 0;
  virtual std::vector<ParamDomain> theta_domain() const;

  virtual double LogDensity(const PointRef& x, const Vector& theta) const = 0;
  virtual void Evaluate(const PointRef& x, const Vector& theta, unsigned needs,
                        ModelPoint* out) const = 0;

  Vector Score(const PointRef& x, const Vector& theta) const;
  Matrix Hessian(const PointRef& x, const Vector& theta) const;
  Matrix GradThetaScore(const PointRef& x, const Vector& theta) const;
  std::vector<Matrix> GradThetaHess(const PointRef& x, const Vector& theta) const;

  // Throws ConfigError when theta has the wrong length, is non-finite or
  // lies outside theta_domain().
  void CheckTheta(const Vector& theta) const;
};

using ModelPtr = std::shared_ptr<const Model>;

// Ids: gaussian_location, gaussian_meancov, laplace, symmetric_bessel (s),
// student_t (nu), generalized_gamma, intractable_expfam. Hyper key "d" sets
// the dimension where supported.
ModelPtr BuiltinModel(const std::string& name, const Hyper& hyper = {});
std::vector<std::string> BuiltinModelIds();

// A model defined by its log-density alone; derivative slots are left to
// FiniteDiffWrap.
using LogDensityFn = std::function<double(const PointRef&, const Vector&)>;
ModelPtr LogDensityModel(std::string name, int dim_x, int dim_theta,
                         LogDensityFn log_density,
                         std::vector<ParamDomain> domain = {});

// Fills every derivative slot of `base` by central differences of its
// log-density. First derivatives use step eps^(1/3) * max(1, |coord|);
// second and third derivatives use eps^(1/4) and eps^(1/5).
ModelPtr FiniteDiffWrap(ModelPtr base);

// `base` with a constant added to the log-density.
ModelPtr ShiftedModel(ModelPtr base, double constant);

}  // namespace steinest

#endif  // STEINEST_MODEL_H_
