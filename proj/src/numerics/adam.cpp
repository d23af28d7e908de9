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

#include "xmodal/numerics/adam.hpp"

#include <cmath>

#include "xmodal/errors.hpp"

namespace xmodal::numerics {

template <typename T>
double global_grad_norm(const ParameterStore<T>& params) {
  double ss = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.grad_ready) continue;
    for (T g : p.grad.values()) ss += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(ss);
}

template <typename T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(config_.epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  if (config_.weight_decay < 0.0) throw ConfigError("adam: negative weight decay");
}

template <typename T>
double Adam<T>::step(ParameterStore<T>& params, double learning_rate) {
  if (learning_rate < 0.0) throw ContractError("adam: negative learning rate");
  bool any = false;
  for (size_t i = 0; i < params.size(); ++i) any = any || params[i].grad_ready;
  if (!any) throw ContractError("adam: no gradients populated");

  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("adam: non-finite gradient norm");
  const double clip =
      (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.grad_ready) continue;
    auto w = p.value.values();
    auto g = p.grad.values();
    auto m = p.moment1.values();
    auto v = p.moment2.values();
    for (size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(g[j]) * clip;
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / correction1) / (std::sqrt(vj / correction2) + config_.epsilon);
      const double wj = static_cast<double>(w[j]);
      w[j] = static_cast<T>(wj - learning_rate * (update + config_.weight_decay * wj));
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double global_grad_norm<float>(const ParameterStore<float>&);
template double global_grad_norm<double>(const ParameterStore<double>&);

}  // namespace xmodal::numerics
