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

#ifndef XMODAL_AUGMENT_SCENE_GRAPH_HPP_
#define XMODAL_AUGMENT_SCENE_GRAPH_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "xmodal/numerics/rng.hpp"
#include "xmodal/vision/scene.hpp"

namespace xmodal::augment {

using vision::SceneGraph;
using vision::WeightedTerm;

// Object, attribute and relation vocabularies with corpus frequencies. Also
// serves as the parser's lexicon.
struct RewriteVocabularies {
  std::vector<WeightedTerm> objects;
  std::vector<WeightedTerm> attributes;
  std::vector<WeightedTerm> relations;

  static RewriteVocabularies from_grammar(const vision::GrammarConfig& grammar);
};

// Counts every node of the given graphs; entries sorted by text.
RewriteVocabularies build_rewrite_vocabularies(const std::vector<SceneGraph>& graphs);

// Reads captions of the form "a|an|the [attr..] obj (rel|and) ...". Object and
// relation phrases are matched longest-first against the lexicon; without a
// match the last word is taken. Anything else yields an empty graph.
SceneGraph parse_scene_graph(std::string_view caption, const RewriteVocabularies& lexicon);

enum class NodeKind { kObject = 0, kAttribute = 1, kRelation = 2 };

struct RewriteCandidate {
  std::string caption;
  SceneGraph graph;
  NodeKind kind = NodeKind::kObject;
  // Index into graph.objects, graph.attributes or graph.relations.
  size_t node = 0;
  std::string before;
  std::string after;
};

// Each candidate swaps one node for a different entry of the same kind. The
// kind is uniform over the kinds present in the graph, the node uniform within
// the kind, and the replacement drawn by vocabulary frequency. Candidates are
// distinct from the original caption and from each other; fewer than
// n_candidates come back when the vocabularies run out.
std::vector<RewriteCandidate> rewrite_graph_nodes(const SceneGraph& graph, const RewriteVocabularies& vocabs,
                                                  numerics::RngState& rng, size_t n_candidates);

}  // namespace xmodal::augment

#endif  // XMODAL_AUGMENT_SCENE_GRAPH_HPP_
