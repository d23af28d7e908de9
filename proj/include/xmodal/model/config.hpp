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

#ifndef XMODAL_MODEL_CONFIG_HPP_
#define XMODAL_MODEL_CONFIG_HPP_

#include <cstddef>

#include "json.hpp"

namespace xmodal::model {

struct ModelConfig {
  size_t layers = 2;
  size_t hidden = 64;
  size_t ffn = 256;
  size_t heads = 4;
  double hidden_dropout = 0.1;
  double attention_dropout = 0.1;
  // Text tokens per sample including [CLS] and [SEP].
  size_t max_text_len = 32;
  // Regions per image, [IMG] excluded.
  size_t max_regions = 10;
  size_t vocab_size = 512;
  // d_v
  size_t feature_dim = 32;
  // K
  size_t num_classes = 16;
  bool embedding_layer_norm = true;
  double init_std = 0.02;
  double layer_norm_eps = 1e-5;

  size_t region_slots() const { return max_regions + 1; }
  // Room for a seq2seq layout: the text plus one [CLS]/[SEP] wrapper per
  // fragment, with at most ceil(max_text_len / 4) fragments.
  size_t token_slots() const { return max_text_len + 2 * ((max_text_len + 3) / 4); }
  size_t max_positions() const { return region_slots() > token_slots() ? region_slots() : token_slots(); }

  // Throws ConfigError.
  void validate() const;

  static ModelConfig desk() { return {}; }
  static ModelConfig base();
  static ModelConfig large();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace xmodal::model

#endif  // XMODAL_MODEL_CONFIG_HPP_
