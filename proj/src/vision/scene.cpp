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

#include "xmodal/vision/scene.hpp"

#include <cmath>
#include <set>

#include "xmodal/errors.hpp"

namespace xmodal::vision {
namespace {

bool starts_with_vowel(const std::string& word) {
  return !word.empty() && std::string_view("aeiouAEIOU").find(word[0]) != std::string_view::npos;
}

std::vector<double> weights_of(const std::vector<WeightedTerm>& terms) {
  std::vector<double> w;
  for (const auto& t : terms) w.push_back(t.weight);
  return w;
}

std::vector<double> embedding(uint64_t seed, uint64_t stream, size_t dim, double scale) {
  numerics::RngState rng = numerics::RngState(seed).fork(stream);
  std::vector<double> out(dim);
  const double s = scale / std::sqrt(static_cast<double>(dim));
  for (double& v : out) v = s * rng.normal();
  return out;
}

RegionBox place_box(const std::vector<RegionBox>& placed, const GrammarConfig& g, numerics::RngState& rng) {
  RegionBox box;
  for (size_t attempt = 0; attempt < g.placement_attempts; ++attempt) {
    const double w = rng.uniform(0.15, 0.5);
    const double h = rng.uniform(0.15, 0.5);
    box.x1 = rng.uniform(0.0, 1.0 - w);
    box.y1 = rng.uniform(0.0, 1.0 - h);
    box.x2 = box.x1 + w;
    box.y2 = box.y1 + h;
    bool ok = true;
    for (const RegionBox& other : placed) {
      if (overlap_ratio(box, other) > g.max_placement_overlap ||
          overlap_ratio(other, box) > g.max_placement_overlap) {
        ok = false;
        break;
      }
    }
    if (ok) break;
  }
  return box;
}

}  // namespace

void SceneGraph::validate() const {
  for (const auto& a : attributes) {
    if (a.object >= objects.size()) throw InputError("scene graph: attribute owner missing");
  }
  for (const auto& r : relations) {
    if (r.subject >= objects.size() || r.object >= objects.size()) {
      throw InputError("scene graph: relation endpoint missing");
    }
  }
}

std::string render_caption(const SceneGraph& graph) {
  std::string out;
  for (size_t i = 0; i < graph.objects.size(); ++i) {
    if (i > 0) {
      std::string connector = "and";
      for (const auto& r : graph.relations) {
        if (r.subject == i - 1 && r.object == i) {
          connector = r.relation;
          break;
        }
      }
      out += " " + connector + " ";
    }
    std::vector<std::string> words;
    for (const auto& a : graph.attributes) {
      if (a.object == i) words.push_back(a.attribute);
    }
    words.push_back(graph.objects[i]);
    out += starts_with_vowel(words.front()) ? "an" : "a";
    for (const auto& w : words) out += " " + w;
  }
  return out;
}

void GrammarConfig::validate() const {
  if (objects.empty() || attributes.empty() || relations.empty()) {
    throw ConfigError("grammar: object, attribute and relation vocabularies must be nonempty");
  }
  if (min_objects == 0 || min_objects > max_objects) throw ConfigError("grammar: bad object count bounds");
  if (feature_dim == 0) throw ConfigError("grammar: feature_dim must be positive");
  if (!(confidence_lo > 0 && confidence_lo <= confidence_hi && confidence_hi <= 1)) {
    throw ConfigError("grammar: bad confidence range");
  }
  std::set<std::string> seen;
  for (const auto* list : {&objects, &attributes, &relations}) {
    for (const auto& t : *list) {
      if (t.text.empty() || !(t.weight > 0)) throw ConfigError("grammar: empty term or nonpositive weight");
      if (t.text == "a" || t.text == "an" || t.text == "and" || !seen.insert(t.text).second) {
        throw ConfigError("grammar: term '" + t.text + "' is reserved or repeated");
      }
    }
  }
}

GrammarConfig GrammarConfig::desk_default() {
  GrammarConfig g;
  g.objects = {{"ball", 3},    {"table", 3},         {"dog", 2.5},        {"cat", 2.5},
               {"tree", 2},    {"chair", 2},         {"cup", 2},          {"window", 1.5},
               {"bicycle", 1.5}, {"horse", 1.5},     {"umbrella", 1},     {"traffic light", 1},
               {"teddy bear", 1}, {"boat", 1},       {"lamp", 1},         {"kite", 1}};
  g.attributes = {{"red", 2},  {"blue", 2},    {"green", 1.5}, {"yellow", 1}, {"small", 2},
                  {"large", 1.5}, {"wooden", 1}, {"shiny", 1},  {"old", 1},    {"striped", 0.5}};
  g.relations = {{"on", 3},     {"under", 2},   {"near", 2},        {"behind", 1.5},
                 {"beside", 1}, {"next to", 1}, {"in front of", 1}};
  return g;
}

void to_json(nlohmann::json& j, const GrammarConfig& g) {
  auto terms = [](const std::vector<WeightedTerm>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) arr.push_back({t.text, t.weight});
    return arr;
  };
  j = {{"objects", terms(g.objects)},
       {"attributes", terms(g.attributes)},
       {"relations", terms(g.relations)},
       {"feature_dim", g.feature_dim},
       {"min_objects", g.min_objects},
       {"max_objects", g.max_objects},
       {"attribute_prob", g.attribute_prob},
       {"relation_prob", g.relation_prob},
       {"feature_noise", g.feature_noise},
       {"confidence_lo", g.confidence_lo},
       {"confidence_hi", g.confidence_hi},
       {"max_placement_overlap", g.max_placement_overlap},
       {"placement_attempts", g.placement_attempts},
       {"embedding_seed", g.embedding_seed}};
}

void from_json(const nlohmann::json& j, GrammarConfig& g) {
  g = GrammarConfig::desk_default();
  auto terms = [&](const char* key, std::vector<WeightedTerm>& out) {
    if (!j.contains(key)) return;
    out.clear();
    for (const auto& t : j.at(key)) out.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
  };
  terms("objects", g.objects);
  terms("attributes", g.attributes);
  terms("relations", g.relations);
  g.feature_dim = j.value("feature_dim", g.feature_dim);
  g.min_objects = j.value("min_objects", g.min_objects);
  g.max_objects = j.value("max_objects", g.max_objects);
  g.attribute_prob = j.value("attribute_prob", g.attribute_prob);
  g.relation_prob = j.value("relation_prob", g.relation_prob);
  g.feature_noise = j.value("feature_noise", g.feature_noise);
  g.confidence_lo = j.value("confidence_lo", g.confidence_lo);
  g.confidence_hi = j.value("confidence_hi", g.confidence_hi);
  g.max_placement_overlap = j.value("max_placement_overlap", g.max_placement_overlap);
  g.placement_attempts = j.value("placement_attempts", g.placement_attempts);
  g.embedding_seed = j.value("embedding_seed", g.embedding_seed);
}

std::pair<SyntheticScene, std::string> generate_synthetic_scene(const GrammarConfig& grammar,
                                                                numerics::RngState& rng) {
  grammar.validate();
  const auto object_weights = weights_of(grammar.objects);
  const auto attribute_weights = weights_of(grammar.attributes);
  const auto relation_weights = weights_of(grammar.relations);
  const size_t k = grammar.num_classes();
  const size_t d = grammar.feature_dim;

  SyntheticScene scene;
  const auto n = static_cast<size_t>(rng.uniform_range(static_cast<int64_t>(grammar.min_objects),
                                                       static_cast<int64_t>(grammar.max_objects)));
  std::vector<int64_t> attribute_of(n, -1);
  for (size_t i = 0; i < n; ++i) {
    const size_t c = rng.categorical(object_weights);
    scene.object_classes.push_back(c);
    scene.graph.objects.push_back(grammar.objects[c].text);
    if (rng.bernoulli(grammar.attribute_prob)) {
      const size_t a = rng.categorical(attribute_weights);
      attribute_of[i] = static_cast<int64_t>(a);
      scene.graph.attributes.push_back({i, grammar.attributes[a].text});
    }
  }
  for (size_t i = 0; i + 1 < n; ++i) {
    if (rng.bernoulli(grammar.relation_prob)) {
      scene.graph.relations.push_back({i, grammar.relations[rng.categorical(relation_weights)].text, i + 1});
    }
  }

  RegionSet& regions = scene.regions;
  for (size_t i = 0; i < n; ++i) {
    const size_t c = scene.object_classes[i];
    regions.boxes.push_back(place_box(regions.boxes, grammar, rng));

    std::vector<double> feature = embedding(grammar.embedding_seed, c, d, 1.0);
    if (attribute_of[i] >= 0) {
      const auto attr = embedding(grammar.embedding_seed, 100000 + static_cast<uint64_t>(attribute_of[i]), d, 0.5);
      for (size_t t = 0; t < d; ++t) feature[t] += attr[t];
    }
    for (double& v : feature) v += grammar.feature_noise * rng.normal();
    regions.features.push_back(std::move(feature));

    std::vector<double> dist(k, 0.0);
    if (k == 1) {
      dist[0] = 1.0;
    } else {
      const double top = rng.uniform(grammar.confidence_lo, grammar.confidence_hi);
      double rest = 0;
      for (size_t t = 0; t < k; ++t) {
        if (t != c) rest += dist[t] = rng.uniform(0.1, 1.0);
      }
      for (size_t t = 0; t < k; ++t) dist[t] = t == c ? top : (1.0 - top) * dist[t] / rest;
    }
    regions.class_dist.push_back(std::move(dist));
  }
  std::string caption = render_caption(scene.graph);
  return {std::move(scene), std::move(caption)};
}

void to_json(nlohmann::json& j, const SceneGraph& g) {
  nlohmann::json attrs = nlohmann::json::array(), rels = nlohmann::json::array();
  for (const auto& a : g.attributes) attrs.push_back({a.object, a.attribute});
  for (const auto& r : g.relations) rels.push_back({r.subject, r.relation, r.object});
  j = {{"objects", g.objects}, {"attributes", attrs}, {"relations", rels}};
}

void from_json(const nlohmann::json& j, SceneGraph& g) {
  j.at("objects").get_to(g.objects);
  g.attributes.clear();
  g.relations.clear();
  for (const auto& a : j.at("attributes")) g.attributes.push_back({a.at(0).get<size_t>(), a.at(1).get<std::string>()});
  for (const auto& r : j.at("relations")) {
    g.relations.push_back({r.at(0).get<size_t>(), r.at(1).get<std::string>(), r.at(2).get<size_t>()});
  }
  g.validate();
}

}  // namespace xmodal::vision
