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

#ifndef XMODAL_AUGMENT_GROUP_HPP_
#define XMODAL_AUGMENT_GROUP_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/augment/fluency.hpp"
#include "xmodal/augment/mining.hpp"
#include "xmodal/augment/scene_graph.hpp"
#include "xmodal/augment/translate.hpp"
#include "xmodal/retrieval/search.hpp"
#include "xmodal/text/tokenizer.hpp"

namespace xmodal::augment {

struct AugmentConfig {
  size_t positives = 3;
  size_t negatives = 100;
  size_t images = 100;
  size_t texts = 100;
  // Pool sizes before fluency ranking; 0 means `negatives`.
  size_t rewrite_pool = 0;
  size_t mined_pool = 0;
  // Rank rewrites and mined captions together (default) or rank the rewrites
  // alone and append mined captions by similarity.
  bool rank_joint_pool = true;
  size_t text_filter = 1000;

  static AugmentConfig full_scale() { return {}; }
  static AugmentConfig desk_scale() { return {.positives = 3, .negatives = 8, .images = 4, .texts = 4}; }
};

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

// Everything group building reads. Pools: images and texts are addressed by
// their position in the respective index.
struct GroupResources {
  const Translator* translator = nullptr;
  std::vector<std::string> pivots = default_pivots();
  const RewriteVocabularies* vocabs = nullptr;
  const FluencyModel* fluency = nullptr;
  const CaptionPool* captions = nullptr;
  const retrieval::InvertedIndex* image_index = nullptr;
  std::vector<std::string> class_names;
  const retrieval::InvertedIndex* text_index = nullptr;
  std::span<const std::vector<int32_t>> text_tokens;
  std::span<const std::string> texts;
  const retrieval::Embedder* embedder = nullptr;
  const text::Tokenizer* tokenizer = nullptr;
};

struct AnchorPair {
  uint32_t pair_id = 0;
  const vision::RegionSet* regions = nullptr;
  std::string caption;
  // Positions of this pair's own image / caption inside the retrieval pools.
  std::optional<uint32_t> image_pool_id;
  std::optional<uint32_t> text_pool_id;
};

struct CmclGroup {
  uint32_t pair_id = 0;
  std::string caption;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  // "rewrite" or "mined", parallel to negatives.
  std::vector<std::string> negative_sources;
  std::vector<uint32_t> images;
  std::vector<uint32_t> texts;
  std::vector<std::string> text_strings;
  uint64_t seed = 0;
  // Families that came back short of their configured count.
  std::vector<std::string> shortfalls;

  friend bool operator==(const CmclGroup&, const CmclGroup&) = default;
};

inline constexpr int kGroupFileVersion = 1;

// Randomness comes from RngState(seed).fork(pair_id), so a group is rebuilt
// exactly from (seed, pair, resources).
CmclGroup build_cmcl_group(const AnchorPair& pair, const AugmentConfig& config, const GroupResources& resources,
                           uint64_t seed);

void to_json(nlohmann::json& j, const CmclGroup& g);
void from_json(const nlohmann::json& j, CmclGroup& g);

// One group per line after a header line
//   {"schema": "xmodal-cmcl-groups", "version": 1, "pipeline": {...}}.
void write_group_file(const std::filesystem::path& path, const std::vector<CmclGroup>& groups);
std::vector<CmclGroup> read_group_file(const std::filesystem::path& path);

}  // namespace xmodal::augment

#endif  // XMODAL_AUGMENT_GROUP_HPP_
