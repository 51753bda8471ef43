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

#ifndef STEINEST_BESSEL_H_
#define STEINEST_BESSEL_H_

namespace steinest {

// Exponentially scaled modified Bessel functions of the second kind,
// e^z K_nu(z) and e^z K_{nu+1}(z), for real order nu >= 0 and z > 0.
// Overflows for large orders; the log and ratio forms below do not.
struct BesselKPair {
  double k_nu;
  double k_nu_plus_one;
};
BesselKPair ScaledBesselK(double nu, double z);

// log K_nu(z) for any real nu (K_{-nu} = K_nu) and z > 0.
double LogBesselK(double nu, double z);

// K_{nu-1}(z) / K_nu(z) for any real nu and z > 0.
double BesselKRatio(double nu, double z);

}  // namespace steinest

#endif  // STEINEST_BESSEL_H_
