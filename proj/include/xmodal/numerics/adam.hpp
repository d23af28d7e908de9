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

#ifndef XMODAL_NUMERICS_ADAM_HPP_
#define XMODAL_NUMERICS_ADAM_HPP_

#include <cstdint>

#include "xmodal/numerics/parameter.hpp"

namespace xmodal::numerics {

// Defaults follow the pre-training hyper-parameter table.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-6;
  double weight_decay = 0.01;
  // Global L2 norm bound on the gradient; <= 0 disables clipping.
  double clip_norm = 1.0;
};

// Adam with bias correction and decoupled weight decay. Only parameters whose
// gradient was populated by backward() are updated.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  // Clips, updates and returns the global gradient norm measured before
  // clipping. Throws ContractError when no parameter carries a gradient.
  double step(ParameterStore<T>& params, double learning_rate);

  int64_t steps_taken() const { return steps_; }
  void set_steps_taken(int64_t steps) { steps_ = steps; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  int64_t steps_ = 0;
};

// Square root of the sum of squared gradients over parameters with populated
// gradients.
template <typename T>
double global_grad_norm(const ParameterStore<T>& params);

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_ADAM_HPP_
