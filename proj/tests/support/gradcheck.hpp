// Copyright 2026 The xmodal Authors.
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

#ifndef XMODAL_TESTS_SUPPORT_GRADCHECK_HPP_
#define XMODAL_TESTS_SUPPORT_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "xmodal/numerics/tensor.hpp"

namespace xmodal::testing {

// Relative error with an absolute floor so that two vanishing gradients
// compare as equal instead of dividing noise by noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central finite differences of `loss` with respect to every entry of `x`
// (perturbed in place and restored). Returns the worst relative error
// against `analytic`.
inline double finite_difference_check(numerics::Tensor<double>& x,
                                      const std::function<double()>& loss,
                                      const numerics::Tensor<double>& analytic,
                                      double step = 1e-5, double floor = 1e-8) {
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = loss();
    x[i] = saved - step;
    const double down = loss();
    x[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * step), floor));
  }
  return worst;
}

}  // namespace xmodal::testing

#endif  // XMODAL_TESTS_SUPPORT_GRADCHECK_HPP_
