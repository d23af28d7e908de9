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

#ifndef XMODAL_MODEL_PACK_HPP_
#define XMODAL_MODEL_PACK_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "xmodal/model/config.hpp"
#include "xmodal/numerics/tensor.hpp"
#include "xmodal/vision/regions.hpp"

namespace xmodal::model {

enum class SampleKind { kPair, kText, kImage };

// kCompact keeps only the slots a sample needs (still with the pseudo slots of
// a missing modality); kFull pads to the fixed config layout.
enum class PackMode { kCompact, kFull };

enum class AttentionMode { kBidirectional, kSeq2Seq };

inline constexpr size_t kGeometryDim = 5;

// Slot layout: [IMG] v_1..v_R | [CLS] w_1..w_n [SEP] (+ seq2seq target), with
// padding after each segment in full mode. Slot 0 holds [IMG] and slot
// region_slots holds [CLS].
struct InputPack {
  SampleKind kind = SampleKind::kPair;
  PackMode layout = PackMode::kCompact;
  size_t region_slots = 0;
  size_t token_slots = 0;
  // Real regions and real tokens (0 for the missing modality).
  size_t region_count = 0;
  size_t text_length = 0;
  // [region_slots, d_v] and [region_slots, 5]; zero rows for [IMG] features,
  // padding and pseudo regions.
  numerics::Tensor<double> features;
  numerics::Tensor<double> geometry;
  std::vector<int32_t> token_ids;
  // Per slot, region slots first.
  std::vector<int32_t> positions;
  std::vector<int32_t> segments;
  std::vector<uint8_t> pseudo;
  // Row-major total() x total(); mask[i * total() + j] lets slot i attend to j.
  std::vector<uint8_t> mask;
  AttentionMode mode = AttentionMode::kBidirectional;
  // Seq2seq only: number of leading text tokens forming the source.
  size_t source_len = 0;

  size_t total() const { return region_slots + token_slots; }
  size_t img_slot() const { return 0; }
  size_t cls_slot() const { return region_slots; }
  size_t region_slot(size_t region) const { return 1 + region; }
  size_t token_slot(size_t position) const { return region_slots + position; }
  bool visible(size_t from, size_t to) const { return mask[from * total() + to] != 0; }
  bool is_real(size_t slot) const { return pseudo[slot] == 0; }
};

// Throws ContractError when the regions or tokens exceed the config limits and
// InputError for an empty caption.
InputPack assemble_pair(const vision::RegionSet& regions, std::span<const int32_t> tokens, const ModelConfig& config,
                        PackMode mode = PackMode::kCompact);
InputPack assemble_single_text(std::span<const int32_t> tokens, const ModelConfig& config,
                               PackMode mode = PackMode::kCompact);
InputPack assemble_single_image(const vision::RegionSet& regions, const ModelConfig& config,
                                PackMode mode = PackMode::kCompact);

// Rebuilds the mask. Seq2seq: the first source_len tokens (plus the regions of
// a pair) form the source; target slots see the source and their own left
// context. Throws ContractError for an out-of-range source_len or a seq2seq
// request on an image-only pack.
void build_attention_mode(InputPack& pack, AttentionMode mode, size_t source_len = 0);

// Copy of a compact pack with `target` appended after the text and seq2seq
// attention over the original text as source.
InputPack append_target(const InputPack& source, std::span<const int32_t> target, const ModelConfig& config);

}  // namespace xmodal::model

#endif  // XMODAL_MODEL_PACK_HPP_
