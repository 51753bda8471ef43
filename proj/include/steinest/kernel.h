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

#ifndef STEINEST_KERNEL_H_
#define STEINEST_KERNEL_H_

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "steinest/common.h"
#include "steinest/model.h"

namespace steinest {

// Value and derivatives of a scalar kernel at one pair (x, y).
struct KernelDerivs {
  double k = 0.0;
  SmallVec gx;   // grad_x k
  SmallVec gy;   // grad_y k
  SmallMat gxy;  // (i, l) = d/dx_i d/dy_l k
};

class ScalarKernel {
 public:
  virtual ~ScalarKernel() = default;
  virtual std::string name() const = 0;
  virtual double Eval(const PointRef& x, const PointRef& y) const = 0;
  virtual void Derivs(const PointRef& x, const PointRef& y,
                      KernelDerivs* out) const = 0;

  Vector GradX(const PointRef& x, const PointRef& y) const;
  Vector GradY(const PointRef& x, const PointRef& y) const;
  Matrix GradXY(const PointRef& x, const PointRef& y) const;
};

using ScalarKernelPtr = std::shared_ptr<const ScalarKernel>;

// exp(-||x - y||^2 / (2 l^2)).
ScalarKernelPtr GaussianKernel(double lengthscale);
// (c^2 + ||x - y||^2 / l^2)^beta with c > 0, beta < 0.
ScalarKernelPtr ImqKernel(double c, double beta, double lengthscale = 1.0);
// Ids "gaussian" (lengthscale) and "imq" (c, beta, lengthscale).
ScalarKernelPtr BuiltinScalarKernel(const std::string& name, const Hyper& hyper);
std::vector<std::string> BuiltinKernelIds();

// A normalized density known in closed form.
struct KnownDensity {
  std::function<double(const PointRef&)> log_pdf;
  std::function<Vector(const PointRef&)> score;
};
KnownDensity IsotropicGaussianDensity(Vector mean, double sigma);

// phi_gamma(x - y) / sqrt(q(x) q(y)) with phi_gamma the N(0, gamma^2 I)
// density. Concentrates on the diagonal as gamma -> 0.
ScalarKernelPtr DensityWeightedGaussianKernel(double gamma, KnownDensity q);

// Derivatives of every distinct scalar kernel of a matrix kernel at a pair.
struct KernelPairDerivs {
  std::array<KernelDerivs, kMaxDim> parts;
  int count = 0;
};

// Matrix-valued kernel of the form B k(x, y) or diag(lambda_r k_r(x, y)).
class MatrixKernel {
 public:
  enum class Form { kScaled, kDiagonal };

  static MatrixKernel Scaled(Matrix b, ScalarKernelPtr k);
  static MatrixKernel ScaledIdentity(int d, ScalarKernelPtr k);
  static MatrixKernel Diagonal(Vector lambda, std::vector<ScalarKernelPtr> ks);

  Form form() const { return form_; }
  int dim() const { return dim_; }
  const Matrix& b() const { return b_; }
  bool b_is_identity() const { return b_identity_; }
  const Vector& lambda() const { return lambda_; }
  // Kernel used for coordinate r; for the scaled form every r shares one.
  int kernel_index(int r) const { return form_ == Form::kScaled ? 0 : slot_[r]; }
  const std::vector<ScalarKernelPtr>& kernels() const { return kernels_; }

  // Multiplies the whole kernel by c > 0.
  MatrixKernel Scale(double c) const;

  Matrix Eval(const PointRef& x, const PointRef& y) const;
  void PairDerivs(const PointRef& x, const PointRef& y,
                  KernelPairDerivs* out) const;

 private:
  MatrixKernel() = default;

  Form form_ = Form::kScaled;
  int dim_ = 0;
  Matrix b_;
  bool b_identity_ = false;
  Vector lambda_;
  std::vector<ScalarKernelPtr> kernels_;  // distinct kernels
  std::vector<int> slot_;                 // coordinate -> kernels_ index
};

}  // namespace steinest

#endif  // STEINEST_KERNEL_H_
