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

#include "xmodal/augment/group.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "spdlog/spdlog.h"
#include "xmodal/errors.hpp"

namespace xmodal::augment {
namespace {

nlohmann::json pipeline_versions() {
  return {{"paraphraser", 1}, {"rewriter", 1}, {"fluency", 1}, {"retrieval", 1}};
}

void note_shortfall(CmclGroup& g, const char* family, size_t got, size_t want) {
  if (got >= want) return;
  g.shortfalls.push_back(std::string(family) + ":" + std::to_string(got) + "/" + std::to_string(want));
}

}  // namespace

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = {{"positives", c.positives},       {"negatives", c.negatives},   {"images", c.images},
       {"texts", c.texts},               {"rewrite_pool", c.rewrite_pool}, {"mined_pool", c.mined_pool},
       {"rank_joint_pool", c.rank_joint_pool}, {"text_filter", c.text_filter}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  c = AugmentConfig{};
  c.positives = j.value("positives", c.positives);
  c.negatives = j.value("negatives", c.negatives);
  c.images = j.value("images", c.images);
  c.texts = j.value("texts", c.texts);
  c.rewrite_pool = j.value("rewrite_pool", c.rewrite_pool);
  c.mined_pool = j.value("mined_pool", c.mined_pool);
  c.rank_joint_pool = j.value("rank_joint_pool", c.rank_joint_pool);
  c.text_filter = j.value("text_filter", c.text_filter);
}

CmclGroup build_cmcl_group(const AnchorPair& pair, const AugmentConfig& config, const GroupResources& res,
                           uint64_t seed) {
  CmclGroup g;
  g.pair_id = pair.pair_id;
  g.caption = pair.caption;
  g.seed = seed;
  numerics::RngState rng = numerics::RngState(seed).fork(pair.pair_id);

  if (config.positives > 0) {
    if (!res.translator) throw ContractError("build_cmcl_group: positives requested without a translator");
    g.positives = back_translate(pair.caption, *res.translator, res.pivots, config.positives);
    note_shortfall(g, "positives", g.positives.size(), config.positives);
  }

  if (config.negatives > 0) {
    if (!res.vocabs || !res.fluency || !res.captions) {
      throw ContractError("build_cmcl_group: negatives need vocabularies, a fluency model and a caption pool");
    }
    std::set<std::string> banned(g.positives.begin(), g.positives.end());
    banned.insert(pair.caption);
    std::vector<std::string> rewrites, mined;
    const size_t n_rewrite = config.rewrite_pool ? config.rewrite_pool : config.negatives;
    const size_t n_mined = config.mined_pool ? config.mined_pool : config.negatives;
    const auto graph = parse_scene_graph(pair.caption, *res.vocabs);
    for (auto& c : rewrite_graph_nodes(graph, *res.vocabs, rng, n_rewrite)) {
      if (banned.insert(c.caption).second) rewrites.push_back(std::move(c.caption));
    }
    const std::vector<std::string> exclude(banned.begin(), banned.end());
    for (const auto& s : mine_hard_negative_captions(pair.caption, pair.pair_id, *res.captions, n_mined, exclude)) {
      if (banned.insert(res.captions->captions[s.id]).second) mined.push_back(res.captions->captions[s.id]);
    }
    const std::set<std::string> rewrite_set(rewrites.begin(), rewrites.end());
    if (config.rank_joint_pool) {
      std::vector<std::string> pool = rewrites;
      pool.insert(pool.end(), mined.begin(), mined.end());
      g.negatives = rank_by_fluency(pool, *res.fluency, config.negatives);
    } else {
      g.negatives = rank_by_fluency(rewrites, *res.fluency, config.negatives);
      for (size_t i = 0; i < mined.size() && g.negatives.size() < config.negatives; ++i) g.negatives.push_back(mined[i]);
    }
    for (const auto& n : g.negatives) g.negative_sources.push_back(rewrite_set.count(n) ? "rewrite" : "mined");
    note_shortfall(g, "negatives", g.negatives.size(), config.negatives);
  }

  if (config.images > 0) {
    if (!res.image_index || !pair.regions) throw ContractError("build_cmcl_group: images need an image index");
    const auto q = res.image_index->vectorize(retrieval::image_terms(*pair.regions, res.class_names));
    for (const auto& s : retrieval::retrieve_images(q, *res.image_index, config.images, pair.image_pool_id)) {
      g.images.push_back(s.id);
    }
    note_shortfall(g, "images", g.images.size(), config.images);
  }

  if (config.texts > 0) {
    if (!res.text_index || !res.embedder || !res.tokenizer) {
      throw ContractError("build_cmcl_group: texts need a text index, an embedder and a tokenizer");
    }
    const auto tokens = res.tokenizer->encode(pair.caption).ids;
    const retrieval::TextRetrievalConfig rc{.k_filter = config.text_filter, .k_rerank = config.texts};
    for (const auto& s : retrieval::retrieve_texts(pair.caption, tokens, *res.text_index, res.text_tokens,
                                                   *res.embedder, rc, pair.text_pool_id)) {
      g.texts.push_back(s.id);
      g.text_strings.push_back(res.texts.empty() ? std::string() : res.texts[s.id]);
    }
    note_shortfall(g, "texts", g.texts.size(), config.texts);
  }

  if (!g.shortfalls.empty()) {
    spdlog::debug("cmcl group {}: reduced counts", pair.pair_id);
  }
  return g;
}

void to_json(nlohmann::json& j, const CmclGroup& g) {
  j = {{"pair_id", g.pair_id},
       {"caption", g.caption},
       {"positives", g.positives},
       {"negatives", g.negatives},
       {"negative_sources", g.negative_sources},
       {"images", g.images},
       {"texts", g.texts},
       {"text_strings", g.text_strings},
       {"seed", g.seed},
       {"shortfalls", g.shortfalls}};
}

void from_json(const nlohmann::json& j, CmclGroup& g) {
  g.pair_id = j.at("pair_id").get<uint32_t>();
  g.caption = j.at("caption").get<std::string>();
  j.at("positives").get_to(g.positives);
  j.at("negatives").get_to(g.negatives);
  j.at("negative_sources").get_to(g.negative_sources);
  j.at("images").get_to(g.images);
  j.at("texts").get_to(g.texts);
  j.at("text_strings").get_to(g.text_strings);
  g.seed = j.at("seed").get<uint64_t>();
  j.at("shortfalls").get_to(g.shortfalls);
}

void write_group_file(const std::filesystem::path& path, const std::vector<CmclGroup>& groups) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("group file: cannot write " + path.string());
  const nlohmann::json header = {
      {"schema", "xmodal-cmcl-groups"}, {"version", kGroupFileVersion}, {"pipeline", pipeline_versions()}};
  out << header.dump() << '\n';
  for (const auto& g : groups) out << nlohmann::json(g).dump() << '\n';
}

std::vector<CmclGroup> read_group_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("group file: cannot read " + path.string());
  std::string line;
  std::vector<CmclGroup> groups;
  try {
    if (!std::getline(in, line)) throw FormatError("group file: missing header");
    const auto header = nlohmann::json::parse(line);
    if (header.value("schema", "") != "xmodal-cmcl-groups") throw FormatError("group file: wrong schema");
    if (header.value("version", -1) != kGroupFileVersion) throw VersionMismatchError("group file: unsupported version");
    while (std::getline(in, line)) {
      if (!line.empty()) groups.push_back(nlohmann::json::parse(line).get<CmclGroup>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("group file: ") + e.what());
  }
  return groups;
}

}  // namespace xmodal::augment
