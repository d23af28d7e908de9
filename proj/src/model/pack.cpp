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

#include "xmodal/model/pack.hpp"

#include <algorithm>
#include <string>

#include "xmodal/errors.hpp"
#include "xmodal/text/vocabulary.hpp"

namespace xmodal::model {
namespace {

void check_text(std::span<const int32_t> tokens, const ModelConfig& config) {
  if (tokens.size() <= 2) throw InputError("pack: empty text");
  if (tokens.size() > config.max_text_len) {
    throw ContractError("pack: " + std::to_string(tokens.size()) + " tokens exceed max_text_len " +
                        std::to_string(config.max_text_len));
  }
  if (tokens.front() != text::kCls || tokens.back() != text::kSep) {
    throw ContractError("pack: text must be wrapped in [CLS] ... [SEP]");
  }
  for (int32_t id : tokens) {
    if (id < 0 || static_cast<size_t>(id) >= config.vocab_size) throw ContractError("pack: token id out of range");
  }
}

void check_regions(const vision::RegionSet& regions, const ModelConfig& config) {
  if (regions.size() > config.max_regions) {
    throw ContractError("pack: " + std::to_string(regions.size()) + " regions exceed max_regions " +
                        std::to_string(config.max_regions));
  }
  if (!regions.empty() && regions.feature_dim() != config.feature_dim) {
    throw ContractError("pack: region feature dimension does not match the config");
  }
}

InputPack build(SampleKind kind, const vision::RegionSet* regions, std::span<const int32_t> tokens,
                const ModelConfig& config, PackMode mode) {
  InputPack p;
  p.kind = kind;
  p.layout = mode;
  p.region_count = regions ? regions->size() : 0;
  p.text_length = tokens.size();
  const bool full = mode == PackMode::kFull;
  p.region_slots = full ? config.region_slots() : p.region_count + 1;
  p.token_slots = full ? config.token_slots() : (kind == SampleKind::kImage ? 2 : p.text_length);

  p.features = numerics::Tensor<double>(numerics::Shape{p.region_slots, config.feature_dim});
  p.geometry = numerics::Tensor<double>(numerics::Shape{p.region_slots, kGeometryDim});
  const double whole_image[kGeometryDim] = {0.0, 0.0, 1.0, 1.0, 1.0};
  std::copy_n(whole_image, kGeometryDim, p.geometry.row(0).data());
  for (size_t r = 0; r < p.region_count; ++r) {
    std::copy(regions->features[r].begin(), regions->features[r].end(), p.features.row(r + 1).begin());
    const auto g = regions->boxes[r].geometry();
    std::copy(g.begin(), g.end(), p.geometry.row(r + 1).begin());
  }

  p.token_ids.assign(p.token_slots, text::kPad);
  if (kind == SampleKind::kImage) {
    p.token_ids.front() = text::kCls;
    p.token_ids.back() = text::kSep;
  } else {
    std::copy(tokens.begin(), tokens.end(), p.token_ids.begin());
  }

  const size_t n = p.total();
  p.positions.resize(n);
  p.segments.resize(n);
  p.pseudo.assign(n, 1);
  for (size_t s = 0; s < p.region_slots; ++s) {
    p.positions[s] = static_cast<int32_t>(s);
    p.segments[s] = 0;
    if (kind != SampleKind::kText && s <= p.region_count) p.pseudo[s] = 0;
  }
  for (size_t t = 0; t < p.token_slots; ++t) {
    const size_t s = p.region_slots + t;
    p.positions[s] = static_cast<int32_t>(t);
    p.segments[s] = 1;
    if (kind != SampleKind::kImage && t < p.text_length) p.pseudo[s] = 0;
  }
  build_attention_mode(p, AttentionMode::kBidirectional);
  return p;
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden == 0 || heads == 0 || hidden % heads != 0) throw ConfigError("model: hidden must be divisible by heads");
  if (ffn == 0) throw ConfigError("model: ffn must be positive");
  if (vocab_size <= text::kReservedCount) throw ConfigError("model: vocabulary too small");
  if (feature_dim == 0 || num_classes == 0) throw ConfigError("model: feature_dim and num_classes must be positive");
  if (max_text_len < 3) throw ConfigError("model: max_text_len must leave room for one token");
  if (!(hidden_dropout >= 0 && hidden_dropout < 1) || !(attention_dropout >= 0 && attention_dropout < 1)) {
    throw ConfigError("model: dropout rates must lie in [0, 1)");
  }
  if (!(init_std > 0) || !(layer_norm_eps > 0)) throw ConfigError("model: init_std and layer_norm_eps must be positive");
}

ModelConfig ModelConfig::base() {
  ModelConfig c;
  c.layers = 12;
  c.hidden = 768;
  c.ffn = 3072;
  c.heads = 12;
  c.max_text_len = 512;
  c.max_regions = 100;
  c.vocab_size = 50265;
  c.feature_dim = 2048;
  c.num_classes = 1601;
  return c;
}

ModelConfig ModelConfig::large() {
  ModelConfig c = base();
  c.layers = 24;
  c.hidden = 1024;
  c.ffn = 4096;
  c.heads = 16;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"layers", c.layers},
       {"hidden", c.hidden},
       {"ffn", c.ffn},
       {"heads", c.heads},
       {"hidden_dropout", c.hidden_dropout},
       {"attention_dropout", c.attention_dropout},
       {"max_text_len", c.max_text_len},
       {"max_regions", c.max_regions},
       {"vocab_size", c.vocab_size},
       {"feature_dim", c.feature_dim},
       {"num_classes", c.num_classes},
       {"embedding_layer_norm", c.embedding_layer_norm},
       {"init_std", c.init_std},
       {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.ffn = j.value("ffn", c.ffn);
  c.heads = j.value("heads", c.heads);
  c.hidden_dropout = j.value("hidden_dropout", c.hidden_dropout);
  c.attention_dropout = j.value("attention_dropout", c.attention_dropout);
  c.max_text_len = j.value("max_text_len", c.max_text_len);
  c.max_regions = j.value("max_regions", c.max_regions);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.embedding_layer_norm = j.value("embedding_layer_norm", c.embedding_layer_norm);
  c.init_std = j.value("init_std", c.init_std);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
}

InputPack assemble_pair(const vision::RegionSet& regions, std::span<const int32_t> tokens, const ModelConfig& config,
                        PackMode mode) {
  check_regions(regions, config);
  check_text(tokens, config);
  return build(SampleKind::kPair, &regions, tokens, config, mode);
}

InputPack assemble_single_text(std::span<const int32_t> tokens, const ModelConfig& config, PackMode mode) {
  check_text(tokens, config);
  return build(SampleKind::kText, nullptr, tokens, config, mode);
}

InputPack assemble_single_image(const vision::RegionSet& regions, const ModelConfig& config, PackMode mode) {
  check_regions(regions, config);
  return build(SampleKind::kImage, &regions, {}, config, mode);
}

void build_attention_mode(InputPack& p, AttentionMode mode, size_t source_len) {
  const size_t n = p.total();
  if (mode == AttentionMode::kSeq2Seq) {
    if (p.kind == SampleKind::kImage) throw ContractError("attention mode: seq2seq needs text");
    if (source_len == 0 || source_len > p.text_length) throw ContractError("attention mode: source_len out of range");
  } else {
    source_len = p.text_length;
  }
  p.mode = mode;
  p.source_len = mode == AttentionMode::kSeq2Seq ? source_len : 0;
  // Text position of each slot, or -1 for region slots.
  auto text_pos = [&](size_t s) -> ptrdiff_t {
    return s < p.region_slots ? -1 : static_cast<ptrdiff_t>(s - p.region_slots);
  };
  const auto src = static_cast<ptrdiff_t>(source_len);
  p.mask.assign(n * n, 0);
  for (size_t i = 0; i < n; ++i) {
    if (p.pseudo[i]) continue;
    const ptrdiff_t ti = text_pos(i);
    const bool i_target = ti >= src;
    for (size_t j = 0; j < n; ++j) {
      if (p.pseudo[j]) continue;
      const ptrdiff_t tj = text_pos(j);
      const bool j_target = tj >= src;
      bool ok;
      if (!j_target) {
        ok = true;  // sources are visible to everyone
      } else {
        ok = i_target && tj <= ti;
      }
      p.mask[i * n + j] = ok ? 1 : 0;
    }
  }
}

InputPack append_target(const InputPack& source, std::span<const int32_t> target, const ModelConfig& config) {
  if (source.kind == SampleKind::kImage) throw ContractError("append_target: image-only pack");
  const size_t len = source.text_length + target.size();
  const bool full = source.layout == PackMode::kFull;
  if (len > config.token_slots() || (full && len > source.token_slots)) {
    throw ContractError("append_target: target does not fit the layout");
  }
  InputPack p = source;
  p.text_length = len;
  if (!full) {
    p.token_slots = len;
    p.token_ids.resize(len);
    const size_t n = p.total();
    p.positions.resize(n);
    p.segments.resize(n);
    p.pseudo.resize(n);
  }
  for (size_t t = 0; t < target.size(); ++t) {
    const int32_t id = target[t];
    if (id < 0 || static_cast<size_t>(id) >= config.vocab_size) throw ContractError("append_target: id out of range");
    const size_t pos = source.text_length + t;
    const size_t s = p.region_slots + pos;
    p.token_ids[pos] = id;
    p.positions[s] = static_cast<int32_t>(pos);
    p.segments[s] = 1;
    p.pseudo[s] = 0;
  }
  build_attention_mode(p, AttentionMode::kSeq2Seq, source.text_length);
  return p;
}

}  // namespace xmodal::model
