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

#include "xmodal/numerics/functional.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmodal/errors.hpp"

namespace xmodal::numerics {

namespace {
void require_finite(std::span<const double> x, const char* op) {
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}
}  // namespace

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw ContractError("log_sum_exp: empty input");
  require_finite(x, "log_sum_exp");
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

std::vector<double> softmax(std::span<const double> x) {
  const double lse = log_sum_exp(x);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i] - lse);
  return out;
}

double cross_entropy_soft(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) {
    throw ShapeError("cross_entropy_soft: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(target.size()) + " targets");
  }
  require_finite(target, "cross_entropy_soft");
  double tsum = 0.0;
  for (double t : target) {
    if (t < 0.0) throw ContractError("cross_entropy_soft: negative target mass");
    tsum += t;
  }
  if (std::abs(tsum - 1.0) > 1e-6) throw ContractError("cross_entropy_soft: target does not sum to 1");
  const double lse = log_sum_exp(logits);
  double loss = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * (logits[i] - lse);
  }
  return loss;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace xmodal::numerics
