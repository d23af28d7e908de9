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

#ifndef XMODAL_NUMERICS_PARAMETER_HPP_
#define XMODAL_NUMERICS_PARAMETER_HPP_

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/numerics/tensor.hpp"

namespace xmodal::numerics {

// A trainable tensor with its gradient and Adam moments. Gradient and moments
// always have the value's shape; moments start at zero.
template <typename T>
struct Parameter {
  Parameter(std::string name_, Tensor<T> init)
      : name(std::move(name_)),
        value(std::move(init)),
        grad(value.shape()),
        moment1(value.shape()),
        moment2(value.shape()) {}

  void zero_grad() {
    grad.fill(T(0));
    grad_ready = false;
  }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> moment1;
  Tensor<T> moment2;
  // Set by backward() when the parameter was reachable from the loss.
  bool grad_ready = false;
};

// Owns parameters in registration order; addresses are stable.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(std::string name, Tensor<T> init) {
    if (index_.contains(name)) throw ContractError("duplicate parameter: " + name);
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(init)));
    return *params_.back();
  }

  Parameter<T>& get(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("unknown parameter: " + std::string(name));
    return *params_[it->second];
  }
  const Parameter<T>& get(std::string_view name) const {
    return const_cast<ParameterStore*>(this)->get(name);
  }
  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  size_t size() const { return params_.size(); }
  Parameter<T>& operator[](size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](size_t i) const { return *params_[i]; }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, size_t> index_;
};

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_PARAMETER_HPP_
