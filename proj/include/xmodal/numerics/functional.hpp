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

#ifndef XMODAL_NUMERICS_FUNCTIONAL_HPP_
#define XMODAL_NUMERICS_FUNCTIONAL_HPP_

#include <span>
#include <vector>

namespace xmodal::numerics {

// Log-sum-exp stabilized softmax. Throws NumericError on NaN/Inf input and
// ContractError on empty input.
std::vector<double> softmax(std::span<const double> x);

double log_sum_exp(std::span<const double> x);

// -sum_i target[i] * log softmax(logits)[i]. Target must be a distribution.
double cross_entropy_soft(std::span<const double> logits, std::span<const double> target);

double entropy(std::span<const double> p);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_FUNCTIONAL_HPP_
