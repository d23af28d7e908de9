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

#include "xmodal/numerics/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_set>

#include "xmodal/errors.hpp"

namespace xmodal::numerics {

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMajor<T>>;
template <typename T>
using Map = Eigen::Map<RowMajor<T>>;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

// Registers an op output. Inputs that need no gradient are dropped from the
// tape so constant subgraphs cost nothing on the way back.
template <typename T>
Var<T> make(const char* op, Tensor<T> value, std::vector<NodePtr<T>> inputs,
            std::function<void(Node<T>&)> bw) {
  check_finite(value, op);
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad;
  node->requires_grad = needs;
  if (needs) {
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
  }
  return Var<T>(std::move(node));
}

template <typename T>
size_t cols_of(const Tensor<T>& t) {
  return t.cols();
}

template <typename T>
size_t rows_of(const Tensor<T>& t) {
  return t.rank() == 0 ? 1 : t.size() / t.cols();
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void require_rank2(const Var<T>& a, const char* op) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

}  // namespace

template <typename T>
Var<T> Var<T>::constant(Tensor<T> value) {
  check_finite(value, "constant");
  auto node = std::make_shared<Node<T>>();
  node->op = "constant";
  node->value = std::move(value);
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> Var<T>::leaf(Tensor<T> value) {
  check_finite(value, "leaf");
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> Var<T>::param(Parameter<T>& p) {
  auto node = std::make_shared<Node<T>>();
  node->op = "param";
  node->value = p.value;
  node->requires_grad = true;
  node->param = &p;
  return Var<T>(std::move(node));
}

template <typename T>
void backward(const Var<T>& output) {
  if (!output.valid() || output.size() != 1) {
    throw ContractError("backward: output must be a scalar");
  }
  if (!output.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(output.node().get(), 0);
  seen.insert(output.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && !seen.contains(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  output.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->has_grad) continue;
    if (node->backward) node->backward(*node);
    if (node->param != nullptr) {
      Parameter<T>& p = *node->param;
      auto dst = p.grad.values();
      auto src = node->grad.values();
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      p.grad_ready = true;
    }
  }
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return make<T>("add", std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    for (auto& in : n.inputs) {
      if (!in->requires_grad) continue;
      auto g = in->grad_buffer().values();
      auto src = n.grad.values();
      for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return make<T>("sub", std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    auto src = n.grad.values();
    if (n.inputs[0]->requires_grad) {
      auto g = n.inputs[0]->grad_buffer().values();
      for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
    }
    if (n.inputs[1]->requires_grad) {
      auto g = n.inputs[1]->grad_buffer().values();
      for (size_t i = 0; i < g.size(); ++i) g[i] -= src[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return make<T>("mul", std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    auto src = n.grad.values();
    auto& x = n.inputs[0];
    auto& y = n.inputs[1];
    if (x->requires_grad) {
      auto g = x->grad_buffer().values();
      auto yv = y->value.values();
      for (size_t i = 0; i < g.size(); ++i) g[i] += src[i] * yv[i];
    }
    if (y->requires_grad) {
      auto g = y->grad_buffer().values();
      auto xv = x->value.values();
      for (size_t i = 0; i < g.size(); ++i) g[i] += src[i] * xv[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v *= s;
  return make<T>("scale", std::move(out), {a.node()}, [s](Node<T>& n) {
    auto g = n.inputs[0]->grad_buffer().values();
    auto src = n.grad.values();
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * src[i];
  });
}

template <typename T>
Var<T> add_rowwise(const Var<T>& a, const Var<T>& b) {
  const size_t m = cols_of(a.value());
  if (b.value().rank() != 1 || b.size() != m) {
    throw ShapeError("add_rowwise: bias " + shape_string(b.shape()) + " vs input " +
                     shape_string(a.shape()));
  }
  Tensor<T> out = a.value();
  const size_t n = rows_of(out);
  for (size_t r = 0; r < n; ++r) {
    T* row = out.data() + r * m;
    for (size_t c = 0; c < m; ++c) row[c] += b.value()[c];
  }
  return make<T>("add_rowwise", std::move(out), {a.node(), b.node()}, [n, m](Node<T>& nd) {
    const T* src = nd.grad.data();
    if (nd.inputs[0]->requires_grad) {
      auto g = nd.inputs[0]->grad_buffer().values();
      for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
    }
    if (nd.inputs[1]->requires_grad) {
      T* g = nd.inputs[1]->grad_buffer().data();
      for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < m; ++c) g[c] += src[r * m + c];
      }
    }
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor<T> out(Shape{n, m});
  Map<T>(out.data(), n, m).noalias() =
      MapC<T>(a.value().data(), n, k) * MapC<T>(b.value().data(), k, m);
  return make<T>("matmul", std::move(out), {a.node(), b.node()}, [n, k, m](Node<T>& nd) {
    MapC<T> g(nd.grad.data(), n, m);
    auto& x = nd.inputs[0];
    auto& w = nd.inputs[1];
    if (x->requires_grad) {
      Map<T>(x->grad_buffer().data(), n, k).noalias() +=
          g * MapC<T>(w->value.data(), k, m).transpose();
    }
    if (w->requires_grad) {
      Map<T>(w->grad_buffer().data(), k, m).noalias() +=
          MapC<T>(x->value.data(), n, k).transpose() * g;
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  const size_t n = x.shape()[0], k = x.shape()[1], m = w.shape()[1];
  if (w.shape()[0] != k || b.value().rank() != 1 || b.size() != m) {
    throw ShapeError("linear: x " + shape_string(x.shape()) + ", w " + shape_string(w.shape()) +
                     ", b " + shape_string(b.shape()));
  }
  Tensor<T> out(Shape{n, m});
  Map<T> o(out.data(), n, m);
  o.noalias() = MapC<T>(x.value().data(), n, k) * MapC<T>(w.value().data(), k, m);
  o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().data(), m);
  return make<T>("linear", std::move(out), {x.node(), w.node(), b.node()},
                 [n, k, m](Node<T>& nd) {
                   MapC<T> g(nd.grad.data(), n, m);
                   auto& xi = nd.inputs[0];
                   auto& wi = nd.inputs[1];
                   auto& bi = nd.inputs[2];
                   if (xi->requires_grad) {
                     Map<T>(xi->grad_buffer().data(), n, k).noalias() +=
                         g * MapC<T>(wi->value.data(), k, m).transpose();
                   }
                   if (wi->requires_grad) {
                     Map<T>(wi->grad_buffer().data(), k, m).noalias() +=
                         MapC<T>(xi->value.data(), n, k).transpose() * g;
                   }
                   if (bi->requires_grad) {
                     Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bi->grad_buffer().data(), m) +=
                         g.colwise().sum();
                   }
                 });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  Tensor<T> out = a.value();
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (T& v : out.values()) v = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  return make<T>("gelu", std::move(out), {a.node()}, [inv_sqrt2](Node<T>& n) {
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    auto g = n.inputs[0]->grad_buffer().values();
    auto x = n.inputs[0]->value.values();
    auto src = n.grad.values();
    for (size_t i = 0; i < g.size(); ++i) {
      const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
      g[i] += src[i] * (cdf + x[i] * pdf);
    }
  });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v = std::exp(v);
  return make<T>("exp", std::move(out), {a.node()}, [](Node<T>& n) {
    auto g = n.inputs[0]->grad_buffer().values();
    auto y = n.value.values();
    auto src = n.grad.values();
    for (size_t i = 0; i < g.size(); ++i) g[i] += src[i] * y[i];
  });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) {
    if (!(v > T(0))) throw NumericError("log: nonpositive input");
    v = std::log(v);
  }
  return make<T>("log", std::move(out), {a.node()}, [](Node<T>& n) {
    auto g = n.inputs[0]->grad_buffer().values();
    auto x = n.inputs[0]->value.values();
    auto src = n.grad.values();
    for (size_t i = 0; i < g.size(); ++i) g[i] += src[i] / x[i];
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const size_t m = cols_of(x.value());
  const size_t n = rows_of(x.value());
  if (gamma.size() != m || beta.size() != m) throw ShapeError("layer_norm: affine size");
  Tensor<T> out(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(n);
  const T* g = gamma.value().data();
  const T* bt = beta.value().data();
  for (size_t r = 0; r < n; ++r) {
    const T* row = x.value().data() + r * m;
    T mu = 0;
    for (size_t c = 0; c < m; ++c) mu += row[c];
    mu /= T(m);
    T var = 0;
    for (size_t c = 0; c < m; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= T(m);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (size_t c = 0; c < m; ++c) {
      const T h = (row[c] - mu) * is;
      (*xhat)[r * m + c] = h;
      out.data()[r * m + c] = h * g[c] + bt[c];
    }
  }
  return make<T>("layer_norm", std::move(out), {x.node(), gamma.node(), beta.node()},
                 [n, m, xhat, inv_std](Node<T>& nd) {
                   const T* src = nd.grad.data();
                   auto& xi = nd.inputs[0];
                   auto& gi = nd.inputs[1];
                   auto& bi = nd.inputs[2];
                   const T* gam = gi->value.data();
                   if (gi->requires_grad || bi->requires_grad) {
                     T* dg = gi->requires_grad ? gi->grad_buffer().data() : nullptr;
                     T* db = bi->requires_grad ? bi->grad_buffer().data() : nullptr;
                     for (size_t r = 0; r < n; ++r) {
                       for (size_t c = 0; c < m; ++c) {
                         if (dg) dg[c] += src[r * m + c] * (*xhat)[r * m + c];
                         if (db) db[c] += src[r * m + c];
                       }
                     }
                   }
                   if (xi->requires_grad) {
                     T* dx = xi->grad_buffer().data();
                     std::vector<T> dh(m);
                     for (size_t r = 0; r < n; ++r) {
                       T sum_dh = 0, sum_dh_h = 0;
                       for (size_t c = 0; c < m; ++c) {
                         dh[c] = src[r * m + c] * gam[c];
                         sum_dh += dh[c];
                         sum_dh_h += dh[c] * (*xhat)[r * m + c];
                       }
                       const T k = (*inv_std)[r] / T(m);
                       for (size_t c = 0; c < m; ++c) {
                         dx[r * m + c] +=
                             k * (T(m) * dh[c] - sum_dh - (*xhat)[r * m + c] * sum_dh_h);
                       }
                     }
                   }
                 });
}

template <typename T>
Var<T> gather_rows(const Var<T>& table, std::span<const int32_t> ids) {
  require_rank2(table, "gather_rows");
  const size_t vocab = table.shape()[0], m = table.shape()[1];
  Tensor<T> out(Shape{ids.size(), m});
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= vocab) {
      throw ContractError("gather_rows: id " + std::to_string(ids[i]) + " out of range");
    }
    std::copy_n(table.value().data() + ids[i] * m, m, out.data() + i * m);
  }
  std::vector<int32_t> idx(ids.begin(), ids.end());
  return make<T>("gather_rows", std::move(out), {table.node()},
                 [idx = std::move(idx), m](Node<T>& n) {
                   T* g = n.inputs[0]->grad_buffer().data();
                   const T* src = n.grad.data();
                   for (size_t i = 0; i < idx.size(); ++i) {
                     for (size_t c = 0; c < m; ++c) g[idx[i] * m + c] += src[i * m + c];
                   }
                 });
}

template <typename T>
Var<T> select_rows(const Var<T>& x, std::span<const size_t> rows) {
  const size_t m = cols_of(x.value());
  const size_t n = rows_of(x.value());
  Tensor<T> out(Shape{rows.size(), m});
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) throw ContractError("select_rows: row out of range");
    std::copy_n(x.value().data() + rows[i] * m, m, out.data() + i * m);
  }
  std::vector<size_t> idx(rows.begin(), rows.end());
  return make<T>("select_rows", std::move(out), {x.node()},
                 [idx = std::move(idx), m](Node<T>& nd) {
                   T* g = nd.inputs[0]->grad_buffer().data();
                   const T* src = nd.grad.data();
                   for (size_t i = 0; i < idx.size(); ++i) {
                     for (size_t c = 0; c < m; ++c) g[idx[i] * m + c] += src[i * m + c];
                   }
                 });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) return Var<T>::constant(Tensor<T>(Shape{0}));
  const bool vectors = parts[0].value().rank() <= 1;
  const size_t m = vectors ? 1 : cols_of(parts[0].value());
  size_t total_rows = 0;
  std::vector<NodePtr<T>> inputs;
  std::vector<size_t> sizes;
  for (const auto& p : parts) {
    const bool is_vec = p.value().rank() <= 1;
    if (is_vec != vectors || (!vectors && cols_of(p.value()) != m)) {
      throw ShapeError("concat: incompatible part " + shape_string(p.shape()));
    }
    total_rows += vectors ? p.size() : rows_of(p.value());
    inputs.push_back(p.node());
    sizes.push_back(p.size());
  }
  Tensor<T> out(vectors ? Shape{total_rows} : Shape{total_rows, m});
  size_t at = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.size(), out.data() + at);
    at += p.size();
  }
  return make<T>("concat", std::move(out), std::move(inputs),
                 [sizes = std::move(sizes)](Node<T>& n) {
                   size_t at = 0;
                   for (size_t i = 0; i < sizes.size(); ++i) {
                     if (n.inputs[i]->requires_grad) {
                       T* g = n.inputs[i]->grad_buffer().data();
                       for (size_t j = 0; j < sizes[i]; ++j) g[j] += n.grad.data()[at + j];
                     }
                     at += sizes[i];
                   }
                 });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) throw ShapeError("reshape: size mismatch");
  Tensor<T> out(std::move(shape), std::vector<T>(x.value().values().begin(), x.value().values().end()));
  return make<T>("reshape", std::move(out), {x.node()}, [](Node<T>& n) {
    auto g = n.inputs[0]->grad_buffer().values();
    auto src = n.grad.values();
    for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
  });
}

template <typename T>
Var<T> log_softmax_rows(const Var<T>& x) {
  const size_t m = cols_of(x.value());
  const size_t n = rows_of(x.value());
  Tensor<T> out(x.shape());
  for (size_t r = 0; r < n; ++r) {
    const T* row = x.value().data() + r * m;
    T mx = *std::max_element(row, row + m);
    T s = 0;
    for (size_t c = 0; c < m; ++c) s += std::exp(row[c] - mx);
    const T lse = mx + std::log(s);
    for (size_t c = 0; c < m; ++c) out.data()[r * m + c] = row[c] - lse;
  }
  return make<T>("log_softmax_rows", std::move(out), {x.node()}, [n, m](Node<T>& nd) {
    T* g = nd.inputs[0]->grad_buffer().data();
    const T* src = nd.grad.data();
    const T* y = nd.value.data();
    for (size_t r = 0; r < n; ++r) {
      T s = 0;
      for (size_t c = 0; c < m; ++c) s += src[r * m + c];
      for (size_t c = 0; c < m; ++c) g[r * m + c] += src[r * m + c] - std::exp(y[r * m + c]) * s;
    }
  });
}

template <typename T>
Var<T> pick(const Var<T>& x, std::span<const int32_t> ids) {
  const size_t m = cols_of(x.value());
  const size_t n = rows_of(x.value());
  if (ids.size() != n) throw ShapeError("pick: one id per row required");
  Tensor<T> out(Shape{n});
  for (size_t r = 0; r < n; ++r) {
    if (ids[r] < 0 || static_cast<size_t>(ids[r]) >= m) throw ContractError("pick: id out of range");
    out[r] = x.value().data()[r * m + ids[r]];
  }
  std::vector<int32_t> idx(ids.begin(), ids.end());
  return make<T>("pick", std::move(out), {x.node()}, [idx = std::move(idx), m](Node<T>& nd) {
    T* g = nd.inputs[0]->grad_buffer().data();
    for (size_t r = 0; r < idx.size(); ++r) g[r * m + idx[r]] += nd.grad[r];
  });
}

template <typename T>
Var<T> soft_cross_entropy_rows(const Var<T>& logits, const Tensor<T>& target) {
  if (logits.shape() != target.shape()) {
    throw ShapeError("soft_cross_entropy_rows: logits " + shape_string(logits.shape()) +
                     " vs target " + shape_string(target.shape()));
  }
  const size_t m = cols_of(logits.value());
  const size_t n = rows_of(logits.value());
  Tensor<T> out(Shape{n});
  auto probs = std::make_shared<std::vector<T>>(logits.size());
  for (size_t r = 0; r < n; ++r) {
    const T* row = logits.value().data() + r * m;
    const T mx = *std::max_element(row, row + m);
    T s = 0;
    for (size_t c = 0; c < m; ++c) s += std::exp(row[c] - mx);
    const T lse = mx + std::log(s);
    T loss = 0;
    for (size_t c = 0; c < m; ++c) {
      (*probs)[r * m + c] = std::exp(row[c] - lse);
      loss -= target.data()[r * m + c] * (row[c] - lse);
    }
    out[r] = loss;
  }
  return make<T>("soft_cross_entropy_rows", std::move(out), {logits.node()},
                 [probs, target, n, m](Node<T>& nd) {
                   T* g = nd.inputs[0]->grad_buffer().data();
                   for (size_t r = 0; r < n; ++r) {
                     T tsum = 0;
                     for (size_t c = 0; c < m; ++c) tsum += target.data()[r * m + c];
                     for (size_t c = 0; c < m; ++c) {
                       g[r * m + c] +=
                           nd.grad[r] * ((*probs)[r * m + c] * tsum - target.data()[r * m + c]);
                     }
                   }
                 });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  return make<T>("sum", Tensor<T>::scalar(s), {a.node()}, [](Node<T>& n) {
    const T g0 = n.grad[0];
    for (T& g : n.inputs[0]->grad_buffer().values()) g += g0;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.size() == 0) throw ContractError("mean: empty input");
  return scale(sum(a), T(1) / T(a.size()));
}

template <typename T>
Var<T> row_sums(const Var<T>& a) {
  const size_t m = cols_of(a.value());
  const size_t n = rows_of(a.value());
  Tensor<T> out(Shape{n});
  for (size_t r = 0; r < n; ++r) {
    T s = 0;
    for (size_t c = 0; c < m; ++c) s += a.value().data()[r * m + c];
    out[r] = s;
  }
  return make<T>("row_sums", std::move(out), {a.node()}, [n, m](Node<T>& nd) {
    T* g = nd.inputs[0]->grad_buffer().data();
    for (size_t r = 0; r < n; ++r) {
      for (size_t c = 0; c < m; ++c) g[r * m + c] += nd.grad[r];
    }
  });
}

template <typename T>
Var<T> normalize_rows(const Var<T>& x) {
  const size_t m = cols_of(x.value());
  const size_t n = rows_of(x.value());
  Tensor<T> out(x.shape());
  auto norms = std::make_shared<std::vector<T>>(n);
  for (size_t r = 0; r < n; ++r) {
    const T* row = x.value().data() + r * m;
    T ss = 0;
    for (size_t c = 0; c < m; ++c) ss += row[c] * row[c];
    const T nr = std::sqrt(ss);
    if (!(nr > T(0))) throw NumericError("normalize_rows: zero vector");
    (*norms)[r] = nr;
    for (size_t c = 0; c < m; ++c) out.data()[r * m + c] = row[c] / nr;
  }
  return make<T>("normalize_rows", std::move(out), {x.node()}, [norms, n, m](Node<T>& nd) {
    T* g = nd.inputs[0]->grad_buffer().data();
    const T* y = nd.value.data();
    const T* src = nd.grad.data();
    for (size_t r = 0; r < n; ++r) {
      T yg = 0;
      for (size_t c = 0; c < m; ++c) yg += y[r * m + c] * src[r * m + c];
      for (size_t c = 0; c < m; ++c) {
        g[r * m + c] += (src[r * m + c] - y[r * m + c] * yg) / (*norms)[r];
      }
    }
  });
}

template <typename T>
Var<T> dot_rows(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "dot_rows");
  const size_t m = cols_of(a.value());
  const size_t n = rows_of(a.value());
  Tensor<T> out(Shape{n});
  for (size_t r = 0; r < n; ++r) {
    T s = 0;
    for (size_t c = 0; c < m; ++c) s += a.value().data()[r * m + c] * b.value().data()[r * m + c];
    out[r] = s;
  }
  return make<T>("dot_rows", std::move(out), {a.node(), b.node()}, [n, m](Node<T>& nd) {
    auto& x = nd.inputs[0];
    auto& y = nd.inputs[1];
    if (x->requires_grad) {
      T* g = x->grad_buffer().data();
      for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < m; ++c) g[r * m + c] += nd.grad[r] * y->value.data()[r * m + c];
      }
    }
    if (y->requires_grad) {
      T* g = y->grad_buffer().data();
      for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < m; ++c) g[r * m + c] += nd.grad[r] * x->value.data()[r * m + c];
      }
    }
  });
}

template <typename T>
Var<T> logsumexp(const Var<T>& a) {
  if (a.size() == 0) throw ContractError("logsumexp: empty input");
  auto v = a.value().values();
  const T mx = *std::max_element(v.begin(), v.end());
  T s = 0;
  for (T x : v) s += std::exp(x - mx);
  const T lse = mx + std::log(s);
  return make<T>("logsumexp", Tensor<T>::scalar(lse), {a.node()}, [lse](Node<T>& n) {
    auto g = n.inputs[0]->grad_buffer().values();
    auto x = n.inputs[0]->value.values();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0] * std::exp(x[i] - lse);
  });
}

template <typename T>
Var<T> dropout(const Var<T>& x, DropoutSpec spec) {
  if (!spec.active()) return x;
  if (spec.rate >= 1.0) throw ContractError("dropout: rate must be < 1");
  const T keep_scale = T(1) / T(1.0 - spec.rate);
  auto keep = std::make_shared<std::vector<T>>(x.size());
  Tensor<T> out = x.value();
  for (size_t i = 0; i < out.size(); ++i) {
    (*keep)[i] = spec.rng->bernoulli(spec.rate) ? T(0) : keep_scale;
    out[i] *= (*keep)[i];
  }
  return make<T>("dropout", std::move(out), {x.node()}, [keep](Node<T>& n) {
    auto g = n.inputs[0]->grad_buffer().values();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (*keep)[i];
  });
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 const std::vector<AttentionSegment>& segments, size_t heads,
                 DropoutSpec drop) {
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  require_rank2(q, "attention");
  const size_t rows = q.shape()[0], width = q.shape()[1];
  if (heads == 0 || width % heads != 0) throw ShapeError("attention: width not divisible by heads");
  const size_t dh = width / heads;
  const T scale_f = T(1) / std::sqrt(T(dh));

  // Per segment and head, the (possibly dropped-out) probability matrix used
  // in the forward product plus the raw softmax for the backward pass.
  struct Cache {
    std::vector<std::vector<T>> probs;
    std::vector<std::vector<T>> keep;
  };
  auto cache = std::make_shared<Cache>();
  const bool use_drop = drop.active();
  const T keep_scale = use_drop ? T(1) / T(1.0 - drop.rate) : T(1);

  Tensor<T> out(Shape{rows, width});
  const T* Q = q.value().data();
  const T* K = k.value().data();
  const T* V = v.value().data();
  std::vector<T> scores;
  for (const auto& seg : segments) {
    const size_t L = seg.length;
    if (seg.offset + L > rows || seg.mask.size() != L * L) {
      throw ShapeError("attention: segment out of range");
    }
    for (size_t h = 0; h < heads; ++h) {
      std::vector<T> P(L * L, T(0));
      std::vector<T> keep;
      if (use_drop) keep.assign(L * L, keep_scale);
      for (size_t i = 0; i < L; ++i) {
        const T* qi = Q + (seg.offset + i) * width + h * dh;
        T mx = -std::numeric_limits<T>::infinity();
        bool any = false;
        scores.assign(L, T(0));
        for (size_t j = 0; j < L; ++j) {
          if (!seg.mask[i * L + j]) continue;
          const T* kj = K + (seg.offset + j) * width + h * dh;
          T s = 0;
          for (size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s *= scale_f;
          scores[j] = s;
          mx = any ? std::max(mx, s) : s;
          any = true;
        }
        if (!any) continue;
        T z = 0;
        for (size_t j = 0; j < L; ++j) {
          if (!seg.mask[i * L + j]) continue;
          P[i * L + j] = std::exp(scores[j] - mx);
          z += P[i * L + j];
        }
        T* oi = out.data() + (seg.offset + i) * width + h * dh;
        for (size_t j = 0; j < L; ++j) {
          if (!seg.mask[i * L + j]) continue;
          P[i * L + j] /= z;
          T w = P[i * L + j];
          if (use_drop) {
            if (drop.rng->bernoulli(drop.rate)) keep[i * L + j] = T(0);
            w *= keep[i * L + j];
          }
          const T* vj = V + (seg.offset + j) * width + h * dh;
          for (size_t c = 0; c < dh; ++c) oi[c] += w * vj[c];
        }
      }
      cache->probs.push_back(std::move(P));
      cache->keep.push_back(std::move(keep));
    }
  }

  return make<T>(
      "attention", std::move(out), {q.node(), k.node(), v.node()},
      [segments, heads, dh, width, scale_f, cache, use_drop](Node<T>& nd) {
        auto& qn = nd.inputs[0];
        auto& kn = nd.inputs[1];
        auto& vn = nd.inputs[2];
        const T* Q = qn->value.data();
        const T* K = kn->value.data();
        const T* V = vn->value.data();
        T* dQ = qn->requires_grad ? qn->grad_buffer().data() : nullptr;
        T* dK = kn->requires_grad ? kn->grad_buffer().data() : nullptr;
        T* dV = vn->requires_grad ? vn->grad_buffer().data() : nullptr;
        const T* G = nd.grad.data();
        size_t slot = 0;
        std::vector<T> dP;
        for (const auto& seg : segments) {
          const size_t L = seg.length;
          for (size_t h = 0; h < heads; ++h, ++slot) {
            const auto& P = cache->probs[slot];
            const auto& keep = cache->keep[slot];
            dP.assign(L, T(0));
            for (size_t i = 0; i < L; ++i) {
              const T* gi = G + (seg.offset + i) * width + h * dh;
              T dot = 0;
              bool any = false;
              for (size_t j = 0; j < L; ++j) {
                if (!seg.mask[i * L + j]) continue;
                any = true;
                const T* vj = V + (seg.offset + j) * width + h * dh;
                const T kp = use_drop ? keep[i * L + j] : T(1);
                T d = 0;
                for (size_t c = 0; c < dh; ++c) d += gi[c] * vj[c];
                dP[j] = d * kp;
                dot += P[i * L + j] * dP[j];
                if (dV) {
                  T* dvj = dV + (seg.offset + j) * width + h * dh;
                  const T w = P[i * L + j] * kp;
                  for (size_t c = 0; c < dh; ++c) dvj[c] += w * gi[c];
                }
              }
              if (!any) continue;
              const T* qi = Q + (seg.offset + i) * width + h * dh;
              T* dqi = dQ ? dQ + (seg.offset + i) * width + h * dh : nullptr;
              for (size_t j = 0; j < L; ++j) {
                if (!seg.mask[i * L + j]) continue;
                const T ds = P[i * L + j] * (dP[j] - dot) * scale_f;
                const T* kj = K + (seg.offset + j) * width + h * dh;
                if (dqi) {
                  for (size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
                }
                if (dK) {
                  T* dkj = dK + (seg.offset + j) * width + h * dh;
                  for (size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

#define XMODAL_INSTANTIATE_AUTODIFF(T)                                                      \
  template class Var<T>;                                                                   \
  template void backward<T>(const Var<T>&);                                                \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> scale<T>(const Var<T>&, T);                                              \
  template Var<T> add_rowwise<T>(const Var<T>&, const Var<T>&);                            \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                 \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> gelu<T>(const Var<T>&);                                                  \
  template Var<T> exp<T>(const Var<T>&);                                                   \
  template Var<T> log<T>(const Var<T>&);                                                   \
  template Var<T> layer_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);           \
  template Var<T> gather_rows<T>(const Var<T>&, std::span<const int32_t>);                 \
  template Var<T> select_rows<T>(const Var<T>&, std::span<const size_t>);                  \
  template Var<T> concat<T>(std::span<const Var<T>>);                                      \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                        \
  template Var<T> log_softmax_rows<T>(const Var<T>&);                                      \
  template Var<T> pick<T>(const Var<T>&, std::span<const int32_t>);                        \
  template Var<T> soft_cross_entropy_rows<T>(const Var<T>&, const Tensor<T>&);             \
  template Var<T> sum<T>(const Var<T>&);                                                   \
  template Var<T> mean<T>(const Var<T>&);                                                  \
  template Var<T> row_sums<T>(const Var<T>&);                                              \
  template Var<T> normalize_rows<T>(const Var<T>&);                                        \
  template Var<T> dot_rows<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> logsumexp<T>(const Var<T>&);                                             \
  template Var<T> dropout<T>(const Var<T>&, DropoutSpec);                                  \
  template Var<T> attention<T>(const Var<T>&, const Var<T>&, const Var<T>&,                \
                               const std::vector<AttentionSegment>&, size_t, DropoutSpec);

XMODAL_INSTANTIATE_AUTODIFF(float)
XMODAL_INSTANTIATE_AUTODIFF(double)

}  // namespace xmodal::numerics
