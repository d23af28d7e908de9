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

#ifndef XMODAL_TESTS_SUPPORT_REFERENCE_MODEL_HPP_
#define XMODAL_TESTS_SUPPORT_REFERENCE_MODEL_HPP_

// Straight-line Transformer forward over plain nested vectors, one pack at a
// time, reading weights by name. Shares nothing with the library's tape.

#include <cmath>
#include <string>
#include <vector>

#include "xmodal/model/transformer.hpp"

namespace xmodal::testing {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const numerics::Tensor<double>& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  }
  return m;
}

inline std::vector<double> to_vector(const numerics::Tensor<double>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

class ReferenceModel {
 public:
  explicit ReferenceModel(const model::Model<double>& m) : m_(m), cfg_(m.config()) {}

  Matrix weight(const std::string& name) const { return to_matrix(m_.params().get(name).value); }
  std::vector<double> vec(const std::string& name) const { return to_vector(m_.params().get(name).value); }

  // Embedding sum per slot before normalization.
  Matrix embedding_sum(const model::InputPack& p) const {
    const auto tok = weight("embeddings.token"), pos = weight("embeddings.position"),
               seg = weight("embeddings.segment"), rtype = weight("embeddings.region_type"),
               wf = weight("embeddings.feature.weight"), wg = weight("embeddings.geometry.weight");
    const auto bf = vec("embeddings.feature.bias");
    const size_t H = cfg_.hidden;
    Matrix x(p.total(), std::vector<double>(H, 0.0));
    for (size_t s = 0; s < p.total(); ++s) {
      for (size_t h = 0; h < H; ++h) {
        double v = pos[p.positions[s]][h] + seg[p.segments[s]][h];
        if (s < p.region_slots) {
          v += bf[h] + rtype[s == 0 ? 0 : 1][h];
          for (size_t c = 0; c < cfg_.feature_dim; ++c) v += p.features.at(s, c) * wf[c][h];
          for (size_t c = 0; c < model::kGeometryDim; ++c) v += p.geometry.at(s, c) * wg[c][h];
        } else {
          v += tok[p.token_ids[s - p.region_slots]][h];
        }
        x[s][h] = v;
      }
    }
    return x;
  }

  Matrix forward(const model::InputPack& p) const {
    Matrix x = embedding_sum(p);
    if (cfg_.embedding_layer_norm) x = norm(x, "embeddings.norm");
    const size_t n = p.total(), H = cfg_.hidden, heads = cfg_.heads, dh = H / heads;
    for (size_t l = 0; l < cfg_.layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      const auto q = affine(x, pre + "query"), k = affine(x, pre + "key"), v = affine(x, pre + "value");
      Matrix a(n, std::vector<double>(H, 0.0));
      for (size_t h = 0; h < heads; ++h) {
        for (size_t i = 0; i < n; ++i) {
          std::vector<double> w(n, 0.0);
          double mx = -1e300, z = 0;
          bool any = false;
          for (size_t j = 0; j < n; ++j) {
            if (!p.visible(i, j)) continue;
            double s = 0;
            for (size_t c = 0; c < dh; ++c) s += q[i][h * dh + c] * k[j][h * dh + c];
            w[j] = s / std::sqrt(static_cast<double>(dh));
            mx = std::max(mx, w[j]);
            any = true;
          }
          if (!any) continue;
          for (size_t j = 0; j < n; ++j) {
            if (p.visible(i, j)) z += std::exp(w[j] - mx);
          }
          for (size_t j = 0; j < n; ++j) {
            if (!p.visible(i, j)) continue;
            const double pr = std::exp(w[j] - mx) / z;
            for (size_t c = 0; c < dh; ++c) a[i][h * dh + c] += pr * v[j][h * dh + c];
          }
        }
      }
      a = affine(a, pre + "output");
      x = norm(add(x, a), pre + "norm1");
      auto f = affine(x, pre + "ffn_in");
      for (auto& row : f) {
        for (double& u : row) u = 0.5 * u * (1.0 + std::erf(u / std::sqrt(2.0)));
      }
      f = affine(f, pre + "ffn_out");
      x = norm(add(x, f), pre + "norm2");
    }
    return x;
  }

 private:
  Matrix affine(const Matrix& x, const std::string& prefix) const {
    const auto w = weight(prefix + ".weight");
    const auto b = vec(prefix + ".bias");
    Matrix y(x.size(), std::vector<double>(b.size(), 0.0));
    for (size_t i = 0; i < x.size(); ++i) {
      for (size_t o = 0; o < b.size(); ++o) {
        double s = b[o];
        for (size_t c = 0; c < w.size(); ++c) s += x[i][c] * w[c][o];
        y[i][o] = s;
      }
    }
    return y;
  }

  static Matrix add(Matrix a, const Matrix& b) {
    for (size_t i = 0; i < a.size(); ++i) {
      for (size_t c = 0; c < a[i].size(); ++c) a[i][c] += b[i][c];
    }
    return a;
  }

  Matrix norm(Matrix x, const std::string& prefix) const {
    const auto g = vec(prefix + ".gamma"), b = vec(prefix + ".beta");
    for (auto& row : x) {
      double mu = 0, var = 0;
      for (double u : row) mu += u;
      mu /= static_cast<double>(row.size());
      for (double u : row) var += (u - mu) * (u - mu);
      var /= static_cast<double>(row.size());
      const double inv = 1.0 / std::sqrt(var + cfg_.layer_norm_eps);
      for (size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mu) * inv * g[c] + b[c];
    }
    return x;
  }

  const model::Model<double>& m_;
  model::ModelConfig cfg_;
};

}  // namespace xmodal::testing

#endif  // XMODAL_TESTS_SUPPORT_REFERENCE_MODEL_HPP_
