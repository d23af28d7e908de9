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

#ifndef XMODAL_NUMERICS_AUTODIFF_HPP_
#define XMODAL_NUMERICS_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "xmodal/numerics/parameter.hpp"
#include "xmodal/numerics/rng.hpp"
#include "xmodal/numerics/tensor.hpp"

namespace xmodal::numerics {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;
  Parameter<T>* param = nullptr;

  Tensor<T>& grad_buffer() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

// Handle to a value recorded on the reverse-mode tape. Values are immutable
// once produced; the tape is the graph of shared input pointers.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  // Values that never receive gradients.
  static Var constant(Tensor<T> value);
  // Leaf whose gradient is readable through grad() after backward().
  static Var leaf(Tensor<T> value);
  // Leaf whose gradient is added into the parameter after backward().
  static Var param(Parameter<T>& p);

  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  // Zero tensor when backward() never reached this node.
  Tensor<T> grad() const {
    return node_->has_grad ? node_->grad : Tensor<T>(node_->value.shape());
  }
  T item() const { return node_->value.item(); }
  bool valid() const { return node_ != nullptr; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Seeds d(output)/d(output) = 1 and propagates to every reachable leaf.
// Parameter gradients accumulate (call zero_grad between steps).
template <typename T>
void backward(const Var<T>& output);

// One self-attention block-diagonal segment: rows [offset, offset+length) of
// Q/K/V form one sequence; mask[i*length + j] != 0 lets row i attend to row j.
// A row without any visible column yields a zero output.
struct AttentionSegment {
  size_t offset = 0;
  size_t length = 0;
  std::vector<uint8_t> mask;
};

struct DropoutSpec {
  double rate = 0.0;
  RngState* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
// a[n, m] + b[m] broadcast over rows.
template <typename T> Var<T> add_rowwise(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// x[n, k] * w[k, m] + b[m].
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
template <typename T> Var<T> gelu(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> log(const Var<T>& a);
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));
template <typename T> Var<T> gather_rows(const Var<T>& table, std::span<const int32_t> ids);
template <typename T> Var<T> select_rows(const Var<T>& x, std::span<const size_t> rows);
// Concatenates along the leading axis; rank-1 inputs give a rank-1 result.
template <typename T> Var<T> concat(std::span<const Var<T>> parts);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> log_softmax_rows(const Var<T>& x);
// out[i] = x[i, ids[i]].
template <typename T> Var<T> pick(const Var<T>& x, std::span<const int32_t> ids);
// out[i] = -sum_c target[i, c] * log_softmax(x)[i, c].
template <typename T> Var<T> soft_cross_entropy_rows(const Var<T>& logits, const Tensor<T>& target);
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
template <typename T> Var<T> row_sums(const Var<T>& a);
template <typename T> Var<T> normalize_rows(const Var<T>& x);
template <typename T> Var<T> dot_rows(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> logsumexp(const Var<T>& a);
template <typename T> Var<T> dropout(const Var<T>& x, DropoutSpec spec);
// Fused multi-head scaled dot-product attention over block-diagonal segments.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 const std::vector<AttentionSegment>& segments, size_t heads,
                 DropoutSpec dropout = {});

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_AUTODIFF_HPP_
