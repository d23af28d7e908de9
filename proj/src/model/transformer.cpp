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

#include "xmodal/model/transformer.hpp"

#include <limits>
#include <string>

#include "xmodal/errors.hpp"
#include "xmodal/text/vocabulary.hpp"

namespace xmodal::model {

using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

std::vector<numerics::AttentionSegment> BatchLayout::segments() const {
  std::vector<numerics::AttentionSegment> out;
  out.reserve(packs.size());
  for (size_t i = 0; i < packs.size(); ++i) out.push_back({offsets[i], packs[i]->total(), packs[i]->mask});
  return out;
}

BatchLayout make_layout(std::span<const InputPack* const> packs) {
  BatchLayout layout;
  for (const InputPack* p : packs) {
    if (p == nullptr) throw ContractError("make_layout: null pack");
    layout.packs.push_back(p);
    layout.offsets.push_back(layout.rows);
    layout.rows += p->total();
  }
  return layout;
}

template <typename T>
Var<T> EncodedOutput<T>::h_img(size_t pack) const {
  const size_t r = img_row(pack);
  return numerics::select_rows(hidden, std::span<const size_t>(&r, 1));
}

template <typename T>
Var<T> EncodedOutput<T>::h_cls(size_t pack) const {
  const size_t r = cls_row(pack);
  return numerics::select_rows(hidden, std::span<const size_t>(&r, 1));
}

namespace {

template <typename T>
Tensor<T> normal_init(Shape shape, double std, numerics::RngState& rng) {
  Tensor<T> t(std::move(shape));
  for (T& v : t.values()) v = static_cast<T>(rng.normal() * std);
  return t;
}

template <typename T>
Tensor<T> filled(Shape shape, T value) {
  Tensor<T> t(std::move(shape));
  t.fill(value);
  return t;
}

template <typename T>
void check_finite(const Var<T>& x, const std::string& where) {
  if (!x.value().all_finite()) throw NumericError("model: non-finite activation in " + where);
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  numerics::RngState rng(seed);
  const size_t H = config_.hidden, F = config_.ffn;
  const double s = config_.init_std;
  auto weight = [&](const std::string& name, size_t rows, size_t cols) {
    params_.add(name, normal_init<T>(Shape{rows, cols}, s, rng));
  };
  auto bias = [&](const std::string& name, size_t n) { params_.add(name, Tensor<T>(Shape{n})); };
  auto norm_params = [&](const std::string& prefix) {
    params_.add(prefix + ".gamma", filled<T>(Shape{H}, T(1)));
    params_.add(prefix + ".beta", Tensor<T>(Shape{H}));
  };

  weight("embeddings.token", config_.vocab_size, H);
  weight("embeddings.position", config_.max_positions(), H);
  weight("embeddings.segment", 2, H);
  weight("embeddings.region_type", 2, H);
  weight("embeddings.feature.weight", config_.feature_dim, H);
  bias("embeddings.feature.bias", H);
  weight("embeddings.geometry.weight", kGeometryDim, H);
  if (config_.embedding_layer_norm) norm_params("embeddings.norm");
  for (size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    for (const char* m : {"query", "key", "value", "output"}) {
      weight(pre + m + ".weight", H, H);
      bias(pre + m + ".bias", H);
    }
    norm_params(pre + "norm1");
    weight(pre + "ffn_in.weight", H, F);
    bias(pre + "ffn_in.bias", F);
    weight(pre + "ffn_out.weight", F, H);
    bias(pre + "ffn_out.bias", H);
    norm_params(pre + "norm2");
  }
  weight("lm_head.weight", H, config_.vocab_size);
  bias("lm_head.bias", config_.vocab_size);
  weight("visual.regression.weight", H, config_.feature_dim);
  bias("visual.regression.bias", config_.feature_dim);
  weight("visual.classification.weight", H, config_.num_classes);
  bias("visual.classification.bias", config_.num_classes);
}

template <typename T>
Var<T> Model<T>::p(const std::string& name) {
  return Var<T>::param(params_.get(name));
}

template <typename T>
Var<T> Model<T>::p(const char* name) {
  return Var<T>::param(params_.get(name));
}

template <typename T>
Var<T> Model<T>::norm(const Var<T>& x, const std::string& prefix) {
  return numerics::layer_norm(x, p(prefix + ".gamma"), p(prefix + ".beta"), static_cast<T>(config_.layer_norm_eps));
}

template <typename T>
Var<T> Model<T>::embed(const BatchLayout& layout, numerics::RngState* dropout_rng) {
  const size_t dv = config_.feature_dim;
  size_t n_regions = 0, n_tokens = 0;
  for (const InputPack* pk : layout.packs) {
    if (pk->features.cols() != dv || pk->features.rows() != pk->region_slots) {
      throw ShapeError("embed: pack features do not match the config");
    }
    n_regions += pk->region_slots;
    n_tokens += pk->token_slots;
  }
  Tensor<T> features(Shape{n_regions, dv});
  Tensor<T> geometry(Shape{n_regions, kGeometryDim});
  std::vector<int32_t> region_type, token_ids, positions, segments;
  std::vector<size_t> order(layout.rows);
  size_t r = 0, t = 0;
  for (size_t i = 0; i < layout.packs.size(); ++i) {
    const InputPack& pk = *layout.packs[i];
    for (size_t s = 0; s < pk.region_slots; ++s, ++r) {
      for (size_t c = 0; c < dv; ++c) features.at(r, c) = static_cast<T>(pk.features.at(s, c));
      for (size_t c = 0; c < kGeometryDim; ++c) geometry.at(r, c) = static_cast<T>(pk.geometry.at(s, c));
      region_type.push_back(s == 0 ? 0 : 1);
      order[layout.offsets[i] + s] = r;
    }
    for (size_t s = 0; s < pk.token_slots; ++s, ++t) {
      token_ids.push_back(pk.token_ids[s]);
      order[layout.offsets[i] + pk.region_slots + s] = n_regions + t;
    }
    positions.insert(positions.end(), pk.positions.begin(), pk.positions.end());
    segments.insert(segments.end(), pk.segments.begin(), pk.segments.end());
  }

  auto region_part = numerics::add(
      numerics::add(numerics::linear(Var<T>::constant(std::move(features)), p("embeddings.feature.weight"),
                                     p("embeddings.feature.bias")),
                    numerics::matmul(Var<T>::constant(std::move(geometry)), p("embeddings.geometry.weight"))),
      numerics::gather_rows(p("embeddings.region_type"), region_type));
  auto token_part = numerics::gather_rows(p("embeddings.token"), token_ids);
  const std::vector<Var<T>> parts{region_part, token_part};
  auto x = numerics::select_rows(numerics::concat<T>(parts), order);
  x = numerics::add(x, numerics::gather_rows(p("embeddings.position"), positions));
  x = numerics::add(x, numerics::gather_rows(p("embeddings.segment"), segments));
  if (config_.embedding_layer_norm) x = norm(x, "embeddings.norm");
  x = numerics::dropout(x, {config_.hidden_dropout, dropout_rng});
  return x;
}

template <typename T>
EncodedOutput<T> Model<T>::encode(const Var<T>& embeddings, const BatchLayout& layout,
                                  numerics::RngState* dropout_rng) {
  if (embeddings.value().rows() != layout.rows || embeddings.value().cols() != config_.hidden) {
    throw ShapeError("encode: embeddings do not match the layout");
  }
  check_finite(embeddings, "embeddings");
  const auto segments = layout.segments();
  Var<T> x = embeddings;
  for (size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    try {
      auto q = numerics::linear(x, p(pre + "query.weight"), p(pre + "query.bias"));
      auto k = numerics::linear(x, p(pre + "key.weight"), p(pre + "key.bias"));
      auto v = numerics::linear(x, p(pre + "value.weight"), p(pre + "value.bias"));
      auto a = numerics::attention(q, k, v, segments, config_.heads, {config_.attention_dropout, dropout_rng});
      a = numerics::linear(a, p(pre + "output.weight"), p(pre + "output.bias"));
      a = numerics::dropout(a, {config_.hidden_dropout, dropout_rng});
      x = norm(numerics::add(x, a), pre + "norm1");
      auto f = numerics::gelu(numerics::linear(x, p(pre + "ffn_in.weight"), p(pre + "ffn_in.bias")));
      f = numerics::linear(f, p(pre + "ffn_out.weight"), p(pre + "ffn_out.bias"));
      f = numerics::dropout(f, {config_.hidden_dropout, dropout_rng});
      x = norm(numerics::add(x, f), pre + "norm2");
    } catch (const NumericError& e) {
      throw NumericError("model: layer " + std::to_string(l) + ": " + e.what());
    }
    check_finite(x, "layer " + std::to_string(l));
  }
  return {x, layout};
}

template <typename T>
EncodedOutput<T> Model<T>::forward(std::span<const InputPack* const> packs, numerics::RngState* dropout_rng) {
  const BatchLayout layout = make_layout(packs);
  return encode(embed(layout, dropout_rng), layout, dropout_rng);
}

template <typename T>
EncodedOutput<T> Model<T>::forward(const InputPack& pack, numerics::RngState* dropout_rng) {
  const InputPack* one = &pack;
  return forward(std::span<const InputPack* const>(&one, 1), dropout_rng);
}

template <typename T>
Var<T> Model<T>::lm_logits(const Var<T>& hidden_rows) {
  return numerics::linear(hidden_rows, p("lm_head.weight"), p("lm_head.bias"));
}

template <typename T>
Var<T> Model<T>::region_regression(const Var<T>& hidden_rows) {
  return numerics::linear(hidden_rows, p("visual.regression.weight"), p("visual.regression.bias"));
}

template <typename T>
Var<T> Model<T>::region_class_logits(const Var<T>& hidden_rows) {
  return numerics::linear(hidden_rows, p("visual.classification.weight"), p("visual.classification.bias"));
}

template <typename T>
std::vector<int32_t> generate_greedy(Model<T>& model, const InputPack& source, size_t max_len,
                                     GenerateOptions options) {
  std::vector<int32_t> out;
  if (max_len == 0) return out;
  std::vector<int32_t> target{text::kCls};
  while (out.size() < max_len) {
    const InputPack pack = append_target(source, target, model.config());
    auto enc = model.forward(pack);
    const size_t row = enc.layout.row(0, pack.token_slot(pack.text_length - 1));
    const auto logits = model.lm_logits(enc.rows(std::span<const size_t>(&row, 1))).value();
    int32_t best = -1;
    T best_v = -std::numeric_limits<T>::infinity();
    for (size_t id = 0; id < logits.size(); ++id) {
      const auto i = static_cast<int32_t>(id);
      if (i == text::kPad || i == text::kImg || i == text::kMask) continue;
      if (best < 0 || logits[id] > best_v) {
        best = i;
        best_v = logits[id];
      }
    }
    if (best == text::kSep && options.stop_at_sep) break;
    out.push_back(best);
    target.push_back(best);
  }
  return out;
}

template struct EncodedOutput<float>;
template struct EncodedOutput<double>;
template class Model<float>;
template class Model<double>;
template std::vector<int32_t> generate_greedy<float>(Model<float>&, const InputPack&, size_t, GenerateOptions);
template std::vector<int32_t> generate_greedy<double>(Model<double>&, const InputPack&, size_t, GenerateOptions);

}  // namespace xmodal::model
