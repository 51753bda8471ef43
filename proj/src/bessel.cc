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

#include "steinest/bessel.h"

#include <cmath>
#include <limits>
#include <numbers>

#include "steinest/common.h"

namespace steinest {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxTerms = 100000;

// (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and the matching half-sum,
// plus 1/Gamma(1+mu) and 1/Gamma(1-mu).
struct TemmeGammas {
  double gam1, gam2, gampl, gammi;
};

TemmeGammas ComputeTemmeGammas(double mu) {
  TemmeGammas g;
  g.gampl = 1.0 / std::tgamma(1.0 + mu);
  g.gammi = 1.0 / std::tgamma(1.0 - mu);
  g.gam2 = 0.5 * (g.gammi + g.gampl);
  if (std::abs(mu) < 1e-3) {
    // Taylor coefficients of 1/Gamma(1+x) at x^1 and x^3.
    constexpr double kC1 = 0.57721566490153286061;
    constexpr double kC3 = -0.042002635034095235529;
    g.gam1 = -(kC1 + kC3 * mu * mu);
  } else {
    g.gam1 = (g.gammi - g.gampl) / (2.0 * mu);
  }
  return g;
}

// Returns e^z K_mu(z), e^z K_{mu+1}(z) for |mu| <= 1/2.
BesselKPair ScaledKSmallOrder(double mu, double z) {
  const double pi = std::numbers::pi;
  if (z <= 2.0) {
    const double x2 = 0.5 * z;
    const double pimu = pi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const TemmeGammas g = ComputeTemmeGammas(mu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxTerms; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu * mu);
      c *= d / di;
      p /= di - mu;
      q /= di + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * p - di * del;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    if (i > kMaxTerms) throw NumericalError("Bessel K series did not converge");
    const double scale = std::exp(z);
    return {sum * scale, sum1 * (2.0 / z) * scale};
  }
  // Steed's continued fraction.
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  int i = 2;
  for (; i <= kMaxTerms; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  if (i > kMaxTerms) throw NumericalError("Bessel K continued fraction did not converge");
  h *= a1;
  const double kmu = std::sqrt(pi / (2.0 * z)) / s;
  const double k1 = kmu * (mu + z + 0.5 - h) / z;
  return {kmu, k1};
}

}  // namespace

namespace {

void CheckArgs(double nu, double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw NumericalError("Bessel K requires a positive finite argument");
  }
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw ConfigError("Bessel K order must be finite and non-negative");
  }
}

// log(e^z K_nu(z)) and K_{nu+1}(z) / K_nu(z). The upward recurrence runs on
// ratios so large orders do not overflow.
struct LogPair {
  double log_k;
  double ratio;
};

LogPair LogScaledPair(double nu, double z) {
  CheckArgs(nu, z);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const BesselKPair r = ScaledKSmallOrder(mu, z);
  double log_k = std::log(r.k_nu);
  double ratio = r.k_nu_plus_one / r.k_nu;
  for (int i = 1; i <= nl; ++i) {
    log_k += std::log(ratio);
    ratio = (mu + i) * (2.0 / z) + 1.0 / ratio;
  }
  return {log_k, ratio};
}

}  // namespace

BesselKPair ScaledBesselK(double nu, double z) {
  CheckArgs(nu, z);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  BesselKPair r = ScaledKSmallOrder(mu, z);
  double kmu = r.k_nu;
  double k1 = r.k_nu_plus_one;
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * (2.0 / z) * k1 + kmu;
    kmu = k1;
    k1 = next;
  }
  return {kmu, k1};
}

double LogBesselK(double nu, double z) {
  return LogScaledPair(std::abs(nu), z).log_k - z;
}

double BesselKRatio(double nu, double z) {
  // K_{nu-1} / K_nu, using K_{-nu} = K_nu.
  if (nu >= 1.0) return 1.0 / LogScaledPair(nu - 1.0, z).ratio;
  // Pair at order -nu gives K_{1-nu} / K_{-nu}.
  if (nu <= 0.0) return LogScaledPair(-nu, z).ratio;
  return std::exp(LogScaledPair(1.0 - nu, z).log_k - LogScaledPair(nu, z).log_k);
}

}  // namespace steinest
