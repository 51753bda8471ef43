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

#ifndef STEINEST_SAMPLING_H_
#define STEINEST_SAMPLING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "steinest/common.h"
#include "steinest/model.h"

namespace steinest {

// Exact draws from the builtin model `name` at theta. Dimension comes from
// theta's length (and hyper "d" for the radial models); hyper supplies s or
// nu where the model needs them. Deterministic in (seed, stream).
//   gaussian_location  N(theta, I/2)
//   gaussian_meancov   N(mu, sigma^2 I)
//   laplace            theta_1 + theta_2 R U, R ~ Gamma(d), U uniform on the sphere
//   student_t          theta_1 + theta_2 T_nu (d = 1)
//   symmetric_bessel   theta_1 + theta_2 sqrt(2 W) Z, W ~ Gamma(s)
//   generalized_gamma  theta_1 +/- G^(1/theta_2), G ~ Gamma(1/theta_2)
//   intractable_expfam rejection from N(0, P^-1)
Sample SampleFrom(const std::string& name, const Vector& theta, Index n,
                  std::uint64_t seed, const Hyper& hyper = {},
                  std::uint64_t stream = 0);

std::vector<std::string> SamplerIds();

// Copy of `sample` with `count` distinct rows, chosen uniformly, set to
// `value`.
Sample Corrupt(const Sample& sample, Index count, const Vector& value,
               std::uint64_t seed);

}  // namespace steinest

#endif  // STEINEST_SAMPLING_H_
