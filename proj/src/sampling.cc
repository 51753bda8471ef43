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

#include "steinest/sampling.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "steinest/expfam.h"

namespace steinest {
namespace {

void CheckLength(const std::string& name, const Vector& theta, Index want) {
  if (theta.size() != want) {
    throw ConfigError(name + " sampler expects " + std::to_string(want) +
                      " parameters, got " + std::to_string(theta.size()));
  }
  if (!theta.allFinite()) throw ConfigError(name + " sampler got a non-finite parameter");
}

double PositiveScale(const std::string& name, double v) {
  if (!(v > 0.0)) throw ConfigError(name + " sampler needs a positive scale");
  return v;
}

Vector Normals(Index d, Rng* rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  for (Index i = 0; i < d; ++i) z(i) = normal(*rng);
  return z;
}

Vector UnitDirection(Index d, Rng* rng) {
  for (;;) {
    const Vector z = Normals(d, rng);
    const double r = z.norm();
    if (r > 0.0) return z / r;
  }
}

}  // namespace

std::vector<std::string> SamplerIds() { return BuiltinModelIds(); }

Sample SampleFrom(const std::string& name, const Vector& theta, Index n,
                  std::uint64_t seed, const Hyper& hyper, std::uint64_t stream) {
  if (n < 0) throw ConfigError("sample size must be non-negative");
  Rng rng(StreamSeed(seed, stream));
  std::normal_distribution<double> normal(0.0, 1.0);

  if (name == "gaussian_location") {
    const Index d = theta.size();
    CheckLength(name, theta, HyperDim(hyper, static_cast<int>(d)));
    Sample s(n, d);
    const double sd = std::sqrt(0.5);
    for (Index i = 0; i < n; ++i) s.mutable_point(i) = theta + sd * Normals(d, &rng);
    return s;
  }
  const int d = HyperDim(hyper, 1);
  if (name == "gaussian_meancov") {
    CheckLength(name, theta, d + 1);
    const double sigma = PositiveScale(name, theta(d));
    Sample s(n, d);
    for (Index i = 0; i < n; ++i) s.mutable_point(i) = theta.head(d) + sigma * Normals(d, &rng);
    return s;
  }
  if (name == "laplace" || name == "symmetric_bessel" || name == "student_t") {
    CheckLength(name, theta, d + 1);
    const Vector loc = theta.head(d);
    const double scale = PositiveScale(name, theta(d));
    Sample s(n, d);
    if (name == "laplace") {
      std::gamma_distribution<double> radius(static_cast<double>(d), 1.0);
      for (Index i = 0; i < n; ++i) {
        const double r = radius(rng);
        s.mutable_point(i) = loc + scale * r * UnitDirection(d, &rng);
      }
    } else if (name == "symmetric_bessel") {
      const double shape = HyperOr(hyper, "s", 1.0);
      if (!(shape > 0.5 * d)) throw ConfigError("symmetric_bessel requires s > d/2");
      std::gamma_distribution<double> mix(shape, 1.0);
      for (Index i = 0; i < n; ++i) {
        const double w = mix(rng);
        s.mutable_point(i) = loc + scale * std::sqrt(2.0 * w) * Normals(d, &rng);
      }
    } else {
      if (d != 1) throw ConfigError("student_t sampler supports d = 1 only");
      const double nu = HyperOr(hyper, "nu", 5.0);
      if (!(nu > 0.0)) throw ConfigError("student_t requires nu > 0");
      std::student_t_distribution<double> t(nu);
      for (Index i = 0; i < n; ++i) s.mutable_point(i)(0) = loc(0) + scale * t(rng);
    }
    return s;
  }
  if (name == "generalized_gamma") {
    if (d != 1) throw ConfigError("generalized_gamma sampler supports d = 1 only");
    CheckLength(name, theta, 2);
    const double power = PositiveScale(name, theta(1));
    std::gamma_distribution<double> g(1.0 / power, 1.0);
    std::bernoulli_distribution flip(0.5);
    Sample s(n, 1);
    for (Index i = 0; i < n; ++i) {
      const double r = std::pow(g(rng), 1.0 / power);
      s.mutable_point(i)(0) = theta(0) + (flip(rng) ? r : -r);
    }
    return s;
  }
  if (name == "intractable_expfam") {
    CheckLength(name, theta, 1);
    const ExpFamPtr spec = BuiltinExpFam(name, hyper);
    const Index dx = spec->dim_x();
    // Proposal N(0, P^-1) with P = -hess b(0), the Gaussian part of the
    // base. What is left is 0.6 tanh(x1) + theta tanh(x5), bounded by
    // 0.6 + |theta|.
    const Matrix precision = -spec->HessBase(Vector::Zero(dx));
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericalError("base precision is not positive definite");
    const Matrix upper = llt.matrixU();
    const double bound = 0.6 + std::abs(theta(0));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Sample s(n, dx);
    for (Index i = 0; i < n; ++i) {
      for (;;) {
        // x = U^{-1} z has covariance P^{-1}.
        const Vector x = upper.triangularView<Eigen::Upper>().solve(Normals(dx, &rng));
        const double tilt = spec->Base(x) + 0.5 * x.dot(precision * x);
        const double log_accept = tilt + theta(0) * spec->Stat(x)(0) - bound;
        if (std::log(unif(rng)) < log_accept) {
          s.mutable_point(i) = x;
          break;
        }
      }
    }
    return s;
  }
  throw ConfigError("no sampler for model id '" + name + "'");
}

Sample Corrupt(const Sample& sample, Index count, const Vector& value,
               std::uint64_t seed) {
  const Index n = sample.size();
  if (count < 0 || count > n) {
    throw ConfigError("corruption count " + std::to_string(count) +
                      " is outside [0, " + std::to_string(n) + "]");
  }
  if (count > 0 && value.size() != sample.dim()) {
    throw ConfigError("corruption value has the wrong dimension");
  }
  if (!value.allFinite()) throw ConfigError("corruption value must be finite");
  Sample out = sample;
  Rng rng(StreamSeed(seed, 1));
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(perm[i], perm[pick(rng)]);
    out.mutable_point(perm[i]) = value;
  }
  return out;
}

}  // namespace steinest
