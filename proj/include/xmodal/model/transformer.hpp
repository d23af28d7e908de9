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

#ifndef XMODAL_MODEL_TRANSFORMER_HPP_
#define XMODAL_MODEL_TRANSFORMER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "xmodal/model/config.hpp"
#include "xmodal/model/pack.hpp"
#include "xmodal/numerics/autodiff.hpp"
#include "xmodal/numerics/parameter.hpp"
#include "xmodal/numerics/rng.hpp"

namespace xmodal::model {

// Row offsets of each pack inside a batched forward pass.
struct BatchLayout {
  std::vector<const InputPack*> packs;
  std::vector<size_t> offsets;
  size_t rows = 0;

  size_t row(size_t pack, size_t slot) const { return offsets[pack] + slot; }
  std::vector<numerics::AttentionSegment> segments() const;
};

BatchLayout make_layout(std::span<const InputPack* const> packs);

template <typename T>
struct EncodedOutput {
  // [layout.rows, hidden]
  numerics::Var<T> hidden;
  BatchLayout layout;

  numerics::Var<T> rows(std::span<const size_t> batch_rows) const {
    return numerics::select_rows(hidden, batch_rows);
  }
  size_t img_row(size_t pack) const { return layout.row(pack, layout.packs[pack]->img_slot()); }
  size_t cls_row(size_t pack) const { return layout.row(pack, layout.packs[pack]->cls_slot()); }
  numerics::Var<T> h_img(size_t pack) const;
  numerics::Var<T> h_cls(size_t pack) const;
};

// Post-LN Transformer encoder over packed samples with an untied LM head and
// the two visual heads.
//
// Parameters, in registration order:
//   embeddings.{token, position, segment, region_type, feature.weight,
//               feature.bias, geometry.weight[, norm.gamma, norm.beta]}
//   layer<l>.{query, key, value, output}.{weight, bias}, layer<l>.norm1.*,
//   layer<l>.ffn_in.*, layer<l>.ffn_out.*, layer<l>.norm2.*
//   lm_head.*, visual.regression.*, visual.classification.*
template <typename T>
class Model {
 public:
  // Weights ~ N(0, init_std) drawn from RngState(seed); biases 0; norms 1/0.
  Model(ModelConfig config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  numerics::ParameterStore<T>& params() { return params_; }
  const numerics::ParameterStore<T>& params() const { return params_; }

  // Embedding sum per slot: token rows get token + position + segment;
  // region rows get feature and geometry projections + region type +
  // position + segment. Optional layer norm and dropout follow.
  numerics::Var<T> embed(const BatchLayout& layout, numerics::RngState* dropout_rng = nullptr);
  // Runs the layer stack over an embedding matrix laid out like `layout`.
  // Throws NumericError naming the layer on a non-finite activation.
  EncodedOutput<T> encode(const numerics::Var<T>& embeddings, const BatchLayout& layout,
                          numerics::RngState* dropout_rng = nullptr);
  EncodedOutput<T> forward(std::span<const InputPack* const> packs, numerics::RngState* dropout_rng = nullptr);
  EncodedOutput<T> forward(const InputPack& pack, numerics::RngState* dropout_rng = nullptr);

  // [n, vocab_size]
  numerics::Var<T> lm_logits(const numerics::Var<T>& hidden_rows);
  // [n, d_v]
  numerics::Var<T> region_regression(const numerics::Var<T>& hidden_rows);
  // [n, K]
  numerics::Var<T> region_class_logits(const numerics::Var<T>& hidden_rows);

 private:
  numerics::Var<T> p(const char* name);
  numerics::Var<T> p(const std::string& name);
  numerics::Var<T> norm(const numerics::Var<T>& x, const std::string& prefix);

  ModelConfig config_;
  numerics::ParameterStore<T> params_;
};

struct GenerateOptions {
  bool stop_at_sep = true;
};

// Greedy decoding of a target after `source` (a compact bidirectional pack):
// the target starts with the given [CLS], and each step appends the argmax
// token outside {[PAD], [IMG], [MASK]}. Returns the generated ids without the
// leading [CLS]; a generated [SEP] ends decoding when stop_at_sep is set and
// is not returned.
template <typename T>
std::vector<int32_t> generate_greedy(Model<T>& model, const InputPack& source, size_t max_len,
                                     GenerateOptions options = {});

}  // namespace xmodal::model

#endif  // XMODAL_MODEL_TRANSFORMER_HPP_
