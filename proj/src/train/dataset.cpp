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

#include "xmodal/train/dataset.hpp"

#include <fstream>

#include "xmodal/errors.hpp"
#include "xmodal/retrieval/search.hpp"

namespace xmodal::train {

Dataset generate_synthetic_dataset(const SyntheticDataConfig& config) {
  Dataset data;
  data.grammar = config.grammar;
  const numerics::RngState root(config.seed);
  numerics::RngState pair_rng = root.fork(1), image_rng = root.fork(2), text_rng = root.fork(3);
  for (size_t i = 0; i < config.pairs; ++i) {
    auto [scene, caption] = vision::generate_synthetic_scene(config.grammar, pair_rng);
    data.pairs.push_back({"pair" + std::to_string(i), std::move(scene.regions), std::move(caption), std::move(scene.graph)});
  }
  for (size_t i = 0; i < config.images; ++i) {
    auto [scene, caption] = vision::generate_synthetic_scene(config.grammar, image_rng);
    data.images.push_back({"image" + std::to_string(i), std::move(scene.regions), "", std::move(scene.graph)});
  }
  for (size_t i = 0; i < config.texts; ++i) {
    data.texts.push_back(vision::generate_synthetic_scene(config.grammar, text_rng).second);
  }
  return data;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  vision::write_scene_file(dir / "pairs.jsonl", data.pairs);
  vision::write_scene_file(dir / "images.jsonl", data.images);
  std::ofstream texts(dir / "texts.txt", std::ios::binary);
  for (const auto& t : data.texts) texts << t << '\n';
  std::ofstream(dir / "grammar.json") << nlohmann::json(data.grammar).dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.pairs = vision::read_scene_file(dir / "pairs.jsonl");
  data.images = vision::read_scene_file(dir / "images.jsonl");
  data.texts = text::read_corpus(dir / "texts.txt");
  std::ifstream g(dir / "grammar.json");
  if (!g) throw InputError("dataset: missing grammar.json in " + dir.string());
  data.grammar = nlohmann::json::parse(g).get<vision::GrammarConfig>();
  for (const auto& p : data.pairs) {
    if (p.caption.empty()) throw InputError("dataset: pair '" + p.id + "' has an empty caption");
  }
  return data;
}

DataResources::DataResources(const Dataset& data, const PoolConfig& config)
    : data_(&data), config_(config) {
  std::vector<std::string> corpus = data.texts;
  for (const auto& p : data.pairs) corpus.push_back(p.caption);
  if (corpus.empty()) throw InputError("dataset: no text to train a vocabulary on");
  tokenizer_ = std::make_unique<text::Tokenizer>(text::train_bpe(corpus, config.vocab_size), config.max_text_len);
  build();
}

DataResources::DataResources(const Dataset& data, const PoolConfig& config, text::Vocabulary vocab)
    : data_(&data), config_(config) {
  tokenizer_ = std::make_unique<text::Tokenizer>(std::move(vocab), config.max_text_len);
  build();
}

void DataResources::build() {
  const Dataset& data = *data_;
  for (const auto& t : data.grammar.objects) class_names_.push_back(t.text);
  std::vector<vision::SceneGraph> graphs;
  std::vector<std::string> captions;
  std::vector<uint32_t> caption_images;
  const auto lexicon = augment::RewriteVocabularies::from_grammar(data.grammar);
  for (uint32_t i = 0; i < data.pairs.size(); ++i) {
    graphs.push_back(augment::parse_scene_graph(data.pairs[i].caption, lexicon));
    captions.push_back(data.pairs[i].caption);
    caption_images.push_back(i);
  }
  vocabs_ = augment::build_rewrite_vocabularies(graphs);
  // Terms never seen in the pair corpus stay out of the rewrite vocabulary;
  // fall back to the grammar lists when a family is empty.
  if (vocabs_.objects.empty()) vocabs_.objects = lexicon.objects;
  if (vocabs_.attributes.empty()) vocabs_.attributes = lexicon.attributes;
  if (vocabs_.relations.empty()) vocabs_.relations = lexicon.relations;
  fluency_ = augment::FluencyModel::train(captions);
  captions_ = augment::CaptionPool::build(captions, caption_images);

  std::vector<vision::RegionSet> pool_images;
  for (const auto& r : data.images) image_pool_.push_back(&r.regions);
  if (config_.images_include_pairs) {
    for (const auto& r : data.pairs) image_pool_.push_back(&r.regions);
  }
  for (const auto* r : image_pool_) pool_images.push_back(*r);
  image_index_ = retrieval::build_image_index(pool_images, class_names_);

  text_pool_ = data.texts;
  if (config_.texts_include_captions) text_pool_.insert(text_pool_.end(), captions.begin(), captions.end());
  std::vector<std::vector<std::string>> docs;
  for (const auto& t : text_pool_) {
    docs.push_back(retrieval::analyze(t));
    text_tokens_.push_back(tokenizer_->encode(t).ids);
  }
  text_index_ = retrieval::InvertedIndex::build(docs);
}

augment::GroupResources DataResources::group_resources(const augment::Translator& translator,
                                                       const retrieval::Embedder& embedder) const {
  augment::GroupResources r;
  r.translator = &translator;
  r.vocabs = &vocabs_;
  r.fluency = &fluency_;
  r.captions = &captions_;
  r.image_index = &image_index_;
  r.class_names = class_names_;
  r.text_index = &text_index_;
  r.text_tokens = text_tokens_;
  r.texts = text_pool_;
  r.embedder = &embedder;
  r.tokenizer = tokenizer_.get();
  return r;
}

augment::AnchorPair DataResources::anchor(uint32_t pair_id) const {
  const auto& p = data_->pairs.at(pair_id);
  augment::AnchorPair a;
  a.pair_id = pair_id;
  a.regions = &p.regions;
  a.caption = p.caption;
  if (config_.images_include_pairs) a.image_pool_id = static_cast<uint32_t>(data_->images.size() + pair_id);
  if (config_.texts_include_captions) a.text_pool_id = static_cast<uint32_t>(data_->texts.size() + pair_id);
  return a;
}

retrieval::MeanTokenEmbedder make_token_embedder(const DataResources& resources, size_t dim, uint64_t seed) {
  if (dim == 0) throw ConfigError("token embedder: dimension must be positive");
  numerics::RngState rng(seed);
  numerics::Tensor<double> table(numerics::Shape{resources.vocabulary().size(), dim});
  for (double& v : table.values()) v = rng.normal();
  return retrieval::MeanTokenEmbedder(std::move(table));
}

std::vector<augment::CmclGroup> build_all_groups(const DataResources& resources, const augment::AugmentConfig& config,
                                                 const augment::Translator& translator,
                                                 const retrieval::Embedder& embedder, uint64_t seed) {
  const auto res = resources.group_resources(translator, embedder);
  std::vector<augment::CmclGroup> groups;
  for (uint32_t i = 0; i < resources.data().pairs.size(); ++i) {
    groups.push_back(augment::build_cmcl_group(resources.anchor(i), config, res, seed));
  }
  return groups;
}

void to_json(nlohmann::json& j, const PoolConfig& c) {
  j = {{"vocab_size", c.vocab_size},
       {"max_text_len", c.max_text_len},
       {"texts_include_captions", c.texts_include_captions},
       {"images_include_pairs", c.images_include_pairs}};
}

void from_json(const nlohmann::json& j, PoolConfig& c) {
  c = PoolConfig{};
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_text_len = j.value("max_text_len", c.max_text_len);
  c.texts_include_captions = j.value("texts_include_captions", c.texts_include_captions);
  c.images_include_pairs = j.value("images_include_pairs", c.images_include_pairs);
}

}  // namespace xmodal::train
