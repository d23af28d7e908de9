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

#ifndef XMODAL_VISION_SCENE_HPP_
#define XMODAL_VISION_SCENE_HPP_

#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/numerics/rng.hpp"
#include "xmodal/vision/regions.hpp"

namespace xmodal::vision {

struct AttributeEdge {
  size_t object = 0;
  std::string attribute;
  friend bool operator==(const AttributeEdge&, const AttributeEdge&) = default;
};

struct RelationEdge {
  size_t subject = 0;
  std::string relation;
  size_t object = 0;
  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

// Objects, their attributes and the relations between them, by object index.
struct SceneGraph {
  std::vector<std::string> objects;
  std::vector<AttributeEdge> attributes;
  std::vector<RelationEdge> relations;

  bool empty() const { return objects.empty(); }
  // Throws InputError when an edge refers to a missing object.
  void validate() const;
  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

// Template grammar: "a [attr..] obj (rel | and) a [attr..] obj ...". The
// article is "an" before a vowel. Only relations between consecutive objects
// (subject i, object i + 1) are expressible; others are not rendered.
std::string render_caption(const SceneGraph& graph);

struct WeightedTerm {
  std::string text;
  double weight = 1.0;
};

struct GrammarConfig {
  std::vector<WeightedTerm> objects;
  std::vector<WeightedTerm> attributes;
  std::vector<WeightedTerm> relations;
  size_t feature_dim = 32;
  size_t min_objects = 1;
  size_t max_objects = 4;
  double attribute_prob = 0.7;
  double relation_prob = 0.6;
  double feature_noise = 0.02;
  // Top class probability is drawn from U(confidence_lo, confidence_hi).
  double confidence_lo = 0.98;
  double confidence_hi = 0.995;
  // Boxes are redrawn while they overlap an earlier box above this ratio.
  double max_placement_overlap = 0.6;
  size_t placement_attempts = 50;
  // Seeds the fixed class and attribute embeddings.
  uint64_t embedding_seed = 0x5eedULL;

  size_t num_classes() const { return objects.size(); }
  // Throws ConfigError on empty vocabularies or impossible bounds.
  void validate() const;
  // 16 object classes, d_v = 32.
  static GrammarConfig desk_default();
};

void to_json(nlohmann::json& j, const GrammarConfig& g);
void from_json(const nlohmann::json& j, GrammarConfig& g);

// Every object of the graph owns one region (region i for object i).
struct SyntheticScene {
  RegionSet regions;
  SceneGraph graph;
  std::vector<size_t> object_classes;
};

// Region features are the fixed class embedding plus the attribute embedding
// (when the object has one) plus N(0, feature_noise^2) noise.
std::pair<SyntheticScene, std::string> generate_synthetic_scene(const GrammarConfig& grammar,
                                                                numerics::RngState& rng);

void to_json(nlohmann::json& j, const SceneGraph& g);
void from_json(const nlohmann::json& j, SceneGraph& g);

}  // namespace xmodal::vision

#endif  // XMODAL_VISION_SCENE_HPP_
