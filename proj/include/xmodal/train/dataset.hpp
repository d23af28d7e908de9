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

#ifndef XMODAL_TRAIN_DATASET_HPP_
#define XMODAL_TRAIN_DATASET_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/augment/group.hpp"
#include "xmodal/retrieval/index.hpp"
#include "xmodal/retrieval/search.hpp"
#include "xmodal/text/tokenizer.hpp"
#include "xmodal/vision/scene_io.hpp"

namespace xmodal::train {

// Raw training data: image-text pairs, single images and single texts.
struct Dataset {
  vision::GrammarConfig grammar;
  std::vector<vision::SceneRecord> pairs;
  std::vector<vision::SceneRecord> images;
  std::vector<std::string> texts;
};

struct SyntheticDataConfig {
  size_t pairs = 32;
  size_t images = 64;
  size_t texts = 64;
  uint64_t seed = 1;
  vision::GrammarConfig grammar = vision::GrammarConfig::desk_default();
};

// Pair captions, single images and corpus sentences all come from the scene
// grammar, each family from its own fork of the seed.
Dataset generate_synthetic_dataset(const SyntheticDataConfig& config);

// Directory layout: pairs.jsonl, images.jsonl, texts.txt, grammar.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

struct PoolConfig {
  size_t vocab_size = 512;
  size_t max_text_len = 64;
  // Retrieved texts come from the corpus and, by default, the other pairs'
  // captions too.
  bool texts_include_captions = true;
  // Retrieved images come from the image collection and the other pairs'
  // images too.
  bool images_include_pairs = true;
};

// Vocabulary, tokenizer and every retrieval / augmentation structure derived
// from a dataset. Image pool: images then (optionally) pair images. Text
// pool: corpus then (optionally) pair captions.
class DataResources {
 public:
  DataResources(const Dataset& data, const PoolConfig& config);
  // Reuses an existing vocabulary instead of training one.
  DataResources(const Dataset& data, const PoolConfig& config, text::Vocabulary vocab);

  const Dataset& data() const { return *data_; }
  const PoolConfig& config() const { return config_; }
  const text::Tokenizer& tokenizer() const { return *tokenizer_; }
  const text::Vocabulary& vocabulary() const { return tokenizer_->vocabulary(); }
  const augment::RewriteVocabularies& rewrite_vocabularies() const { return vocabs_; }
  const augment::FluencyModel& fluency() const { return fluency_; }
  const augment::CaptionPool& caption_pool() const { return captions_; }
  const retrieval::InvertedIndex& image_index() const { return image_index_; }
  const retrieval::InvertedIndex& text_index() const { return text_index_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<const vision::RegionSet*>& image_pool() const { return image_pool_; }
  const std::vector<std::string>& text_pool() const { return text_pool_; }
  const std::vector<std::vector<int32_t>>& text_pool_tokens() const { return text_tokens_; }

  augment::GroupResources group_resources(const augment::Translator& translator,
                                          const retrieval::Embedder& embedder) const;
  augment::AnchorPair anchor(uint32_t pair_id) const;

 private:
  void build();

  const Dataset* data_;
  PoolConfig config_;
  std::unique_ptr<text::Tokenizer> tokenizer_;
  augment::RewriteVocabularies vocabs_;
  augment::FluencyModel fluency_;
  augment::CaptionPool captions_;
  retrieval::InvertedIndex image_index_;
  retrieval::InvertedIndex text_index_;
  std::vector<std::string> class_names_;
  std::vector<const vision::RegionSet*> image_pool_;
  std::vector<std::string> text_pool_;
  std::vector<std::vector<int32_t>> text_tokens_;
};

// Mean-of-token-vectors text embedder over a fixed N(0, 1) table drawn from
// `seed`, one row per vocabulary entry.
retrieval::MeanTokenEmbedder make_token_embedder(const DataResources& resources, size_t dim, uint64_t seed);

std::vector<augment::CmclGroup> build_all_groups(const DataResources& resources, const augment::AugmentConfig& config,
                                                 const augment::Translator& translator,
                                                 const retrieval::Embedder& embedder, uint64_t seed);

void to_json(nlohmann::json& j, const PoolConfig& c);
void from_json(const nlohmann::json& j, PoolConfig& c);

}  // namespace xmodal::train

#endif  // XMODAL_TRAIN_DATASET_HPP_
