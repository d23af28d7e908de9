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

#include "xmodal/augment/scene_graph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "spdlog/spdlog.h"

namespace xmodal::augment {
namespace {

std::vector<std::string> caption_words(std::string_view caption) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && std::ispunct(static_cast<unsigned char>(cur.back()))) cur.pop_back();
    if (!cur.empty()) words.push_back(cur);
    cur.clear();
  };
  for (char c : caption) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  return words;
}

std::vector<std::vector<std::string>> phrases(const std::vector<WeightedTerm>& terms) {
  std::vector<std::vector<std::string>> out;
  for (const auto& t : terms) out.push_back(caption_words(t.text));
  return out;
}

std::string join(const std::vector<std::string>& words, size_t b, size_t e) {
  std::string out;
  for (size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += words[i];
  }
  return out;
}

// Longest entry that is a suffix of words[b, e) leaving at least `keep` words
// in front; 0 when none.
size_t longest_suffix(const std::vector<std::string>& words, size_t b, size_t e, size_t keep,
                      const std::vector<std::vector<std::string>>& entries) {
  size_t best = 0;
  for (const auto& entry : entries) {
    const size_t n = entry.size();
    if (n == 0 || n <= best || e - b < n + keep) continue;
    if (std::equal(entry.begin(), entry.end(), words.begin() + static_cast<ptrdiff_t>(e - n))) best = n;
  }
  return best;
}

bool is_article(const std::string& w) { return w == "a" || w == "an" || w == "the"; }

void count_into(std::map<std::string, double>& m, const std::string& s) { m[s] += 1.0; }

std::vector<WeightedTerm> to_terms(const std::map<std::string, double>& m) {
  std::vector<WeightedTerm> out;
  for (const auto& [text, n] : m) out.push_back({text, n});
  return out;
}

}  // namespace

RewriteVocabularies RewriteVocabularies::from_grammar(const vision::GrammarConfig& grammar) {
  return {grammar.objects, grammar.attributes, grammar.relations};
}

RewriteVocabularies build_rewrite_vocabularies(const std::vector<SceneGraph>& graphs) {
  std::map<std::string, double> objects, attributes, relations;
  for (const auto& g : graphs) {
    for (const auto& o : g.objects) count_into(objects, o);
    for (const auto& a : g.attributes) count_into(attributes, a.attribute);
    for (const auto& r : g.relations) count_into(relations, r.relation);
  }
  return {to_terms(objects), to_terms(attributes), to_terms(relations)};
}

SceneGraph parse_scene_graph(std::string_view caption, const RewriteVocabularies& lexicon) {
  const auto words = caption_words(caption);
  if (words.empty() || !is_article(words[0])) return {};
  std::vector<size_t> articles;
  for (size_t i = 0; i < words.size(); ++i) {
    if (is_article(words[i])) articles.push_back(i);
  }
  const auto objects = phrases(lexicon.objects);
  auto connectors = phrases(lexicon.relations);
  connectors.push_back({"and"});

  SceneGraph g;
  std::vector<std::string> pending;  // connector between object i-1 and i
  for (size_t s = 0; s < articles.size(); ++s) {
    const size_t b = articles[s] + 1;
    size_t e = s + 1 < articles.size() ? articles[s + 1] : words.size();
    if (e <= b) return {};
    if (s + 1 < articles.size()) {
      size_t conn = longest_suffix(words, b, e, 1, connectors);
      if (conn == 0) conn = 1;
      if (e - b < conn + 1) return {};
      pending.push_back(join(words, e - conn, e));
      e -= conn;
    }
    size_t obj = longest_suffix(words, b, e, 0, objects);
    if (obj == 0) obj = 1;
    const size_t index = g.objects.size();
    g.objects.push_back(join(words, e - obj, e));
    for (size_t i = b; i < e - obj; ++i) g.attributes.push_back({index, words[i]});
  }
  for (size_t i = 0; i < pending.size(); ++i) {
    if (pending[i] != "and") g.relations.push_back({i, pending[i], i + 1});
  }
  return g;
}

std::vector<RewriteCandidate> rewrite_graph_nodes(const SceneGraph& graph, const RewriteVocabularies& vocabs,
                                                  numerics::RngState& rng, size_t n_candidates) {
  std::vector<RewriteCandidate> out;
  if (graph.empty()) {
    if (n_candidates > 0) spdlog::debug("rewrite_graph_nodes: empty graph, no candidates");
    return out;
  }
  std::vector<NodeKind> kinds;
  if (!graph.objects.empty()) kinds.push_back(NodeKind::kObject);
  if (!graph.attributes.empty()) kinds.push_back(NodeKind::kAttribute);
  if (!graph.relations.empty()) kinds.push_back(NodeKind::kRelation);

  const std::string original = vision::render_caption(graph);
  std::set<std::string> seen{original};
  const size_t max_draws = 50 * n_candidates + 50;
  for (size_t draw = 0; draw < max_draws && out.size() < n_candidates; ++draw) {
    RewriteCandidate c;
    c.kind = kinds[rng.uniform_int(kinds.size())];
    c.graph = graph;
    const std::vector<WeightedTerm>* vocab = nullptr;
    std::string* slot = nullptr;
    switch (c.kind) {
      case NodeKind::kObject:
        c.node = rng.uniform_int(graph.objects.size());
        slot = &c.graph.objects[c.node];
        vocab = &vocabs.objects;
        break;
      case NodeKind::kAttribute:
        c.node = rng.uniform_int(graph.attributes.size());
        slot = &c.graph.attributes[c.node].attribute;
        vocab = &vocabs.attributes;
        break;
      case NodeKind::kRelation:
        c.node = rng.uniform_int(graph.relations.size());
        slot = &c.graph.relations[c.node].relation;
        vocab = &vocabs.relations;
        break;
    }
    std::vector<double> weights;
    bool any = false;
    for (const auto& t : *vocab) {
      const bool ok = t.text != *slot;
      weights.push_back(ok ? t.weight : 0.0);
      any = any || (ok && t.weight > 0);
    }
    if (!any) continue;
    c.before = *slot;
    c.after = (*vocab)[rng.categorical(weights)].text;
    *slot = c.after;
    c.caption = vision::render_caption(c.graph);
    if (!seen.insert(c.caption).second) continue;
    out.push_back(std::move(c));
  }
  if (out.size() < n_candidates) {
    spdlog::debug("rewrite_graph_nodes: {} of {} candidates for '{}'", out.size(), n_candidates, original);
  }
  return out;
}

}  // namespace xmodal::augment
