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

#include "xmodal/retrieval/search.hpp"

#include <algorithm>
#include <cmath>

#include "spdlog/spdlog.h"
#include "xmodal/errors.hpp"
#include "xmodal/text/vocabulary.hpp"

namespace xmodal::retrieval {

void sort_ranked(std::vector<ScoredId>& items) {
  std::sort(items.begin(), items.end(), [](const ScoredId& a, const ScoredId& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
}

MeanTokenEmbedder::MeanTokenEmbedder(numerics::Tensor<double> table) : table_(std::move(table)) {
  if (table_.rank() != 2) throw ShapeError("mean token embedder: table must be a matrix");
}

std::vector<double> MeanTokenEmbedder::embed(std::span<const int32_t> ids) const {
  std::vector<double> out(dim(), 0.0);
  size_t n = 0;
  for (int32_t id : ids) {
    if (text::is_reserved(id)) continue;
    if (id < 0 || static_cast<size_t>(id) >= table_.rows()) throw InputError("mean token embedder: id out of range");
    const auto row = table_.row(static_cast<size_t>(id));
    for (size_t c = 0; c < out.size(); ++c) out[c] += row[c];
    ++n;
  }
  if (n > 0) {
    for (double& v : out) v /= static_cast<double>(n);
  }
  return out;
}

double dense_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dense_cosine: length mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<std::string> image_terms(const vision::RegionSet& regions, const std::vector<std::string>& class_names) {
  std::vector<std::string> terms;
  for (size_t label : regions.argmax_labels()) {
    terms.push_back(label < class_names.size() ? class_names[label] : "class" + std::to_string(label));
  }
  return terms;
}

InvertedIndex build_image_index(const std::vector<vision::RegionSet>& images,
                                const std::vector<std::string>& class_names) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(images.size());
  for (const auto& img : images) docs.push_back(image_terms(img, class_names));
  return InvertedIndex::build(docs);
}

std::vector<ScoredId> retrieve_images(const SparseVector& query, const InvertedIndex& index, size_t k,
                                      std::optional<uint32_t> exclude) {
  std::vector<ScoredId> scored;
  for (uint32_t d = 0; d < index.num_docs(); ++d) {
    if (exclude && *exclude == d) continue;
    scored.push_back({d, dot(query, index.doc_vector(d))});
  }
  sort_ranked(scored);
  if (scored.size() > k) scored.resize(k);
  return scored;
}

TextRetrievalTrace retrieve_texts_traced(const std::string& query_text, std::span<const int32_t> query_tokens,
                                         const InvertedIndex& index,
                                         std::span<const std::vector<int32_t>> doc_tokens,
                                         const Embedder& embedder, const TextRetrievalConfig& config,
                                         std::optional<uint32_t> exclude) {
  if (doc_tokens.size() != index.num_docs()) {
    throw ContractError("retrieve_texts: token table does not match the index");
  }
  TextRetrievalTrace trace;
  const auto terms = analyze(query_text);
  std::vector<bool> seen(index.num_docs(), false);
  for (const auto& term : terms) {
    if (is_stopword(term)) continue;
    const auto id = index.term_id(term);
    if (!id) continue;
    for (const Posting& p : index.postings(*id)) seen[p.doc] = true;
  }
  for (uint32_t d = 0; d < seen.size(); ++d) {
    if (seen[d] && !(exclude && *exclude == d)) trace.candidates.push_back(d);
  }
  if (trace.candidates.empty()) {
    spdlog::debug("retrieve_texts: no candidate shares a term with '{}'", query_text);
    return trace;
  }

  const SparseVector q = index.vectorize(terms);
  for (uint32_t d : trace.candidates) trace.filtered.push_back({d, dot(q, index.doc_vector(d))});
  sort_ranked(trace.filtered);
  if (trace.filtered.size() > config.k_filter) trace.filtered.resize(config.k_filter);

  const auto q_emb = embedder.embed(query_tokens);
  for (const ScoredId& s : trace.filtered) {
    trace.reranked.push_back({s.id, dense_cosine(q_emb, embedder.embed(doc_tokens[s.id]))});
  }
  sort_ranked(trace.reranked);
  if (trace.reranked.size() > config.k_rerank) trace.reranked.resize(config.k_rerank);
  return trace;
}

std::vector<ScoredId> retrieve_texts(const std::string& query_text, std::span<const int32_t> query_tokens,
                                     const InvertedIndex& index, std::span<const std::vector<int32_t>> doc_tokens,
                                     const Embedder& embedder, const TextRetrievalConfig& config,
                                     std::optional<uint32_t> exclude) {
  return retrieve_texts_traced(query_text, query_tokens, index, doc_tokens, embedder, config, exclude).reranked;
}

}  // namespace xmodal::retrieval
