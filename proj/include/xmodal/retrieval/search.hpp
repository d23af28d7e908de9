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

#ifndef XMODAL_RETRIEVAL_SEARCH_HPP_
#define XMODAL_RETRIEVAL_SEARCH_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmodal/numerics/tensor.hpp"
#include "xmodal/retrieval/index.hpp"
#include "xmodal/vision/regions.hpp"

namespace xmodal::retrieval {

struct ScoredId {
  uint32_t id = 0;
  double score = 0;
  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

// Descending score, then ascending id.
void sort_ranked(std::vector<ScoredId>& items);

// Maps a token id sequence to a fixed-size dense vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual size_t dim() const = 0;
  virtual std::vector<double> embed(std::span<const int32_t> ids) const = 0;
};

// Mean of the embedding-table rows of the non-reserved ids; a zero vector
// when there are none.
class MeanTokenEmbedder : public Embedder {
 public:
  explicit MeanTokenEmbedder(numerics::Tensor<double> table);
  size_t dim() const override { return table_.cols(); }
  std::vector<double> embed(std::span<const int32_t> ids) const override;

 private:
  numerics::Tensor<double> table_;
};

// Cosine of dense vectors; 0 when either is the zero vector.
double dense_cosine(std::span<const double> a, std::span<const double> b);

// Terms of an image: the name of the argmax class of each region. Without
// names, class c is spelled "class<c>".
std::vector<std::string> image_terms(const vision::RegionSet& regions,
                                     const std::vector<std::string>& class_names = {});
InvertedIndex build_image_index(const std::vector<vision::RegionSet>& images,
                                const std::vector<std::string>& class_names = {});

// Top-k images by label TF-IDF cosine over the whole collection, excluding
// `exclude` (the query's own image). Fewer than k when the collection is small.
std::vector<ScoredId> retrieve_images(const SparseVector& query, const InvertedIndex& index, size_t k,
                                      std::optional<uint32_t> exclude = std::nullopt);

struct TextRetrievalConfig {
  size_t k_filter = 1000;
  size_t k_rerank = 100;
};

struct TextRetrievalTrace {
  std::vector<uint32_t> candidates;
  std::vector<ScoredId> filtered;
  std::vector<ScoredId> reranked;
};

// Three stages: documents sharing a non-stopword term with the query; the
// k_filter best by TF-IDF cosine; the k_rerank best by embedder cosine.
// doc_tokens[d] holds the token ids of document d for the embedder.
TextRetrievalTrace retrieve_texts_traced(const std::string& query_text, std::span<const int32_t> query_tokens,
                                         const InvertedIndex& index,
                                         std::span<const std::vector<int32_t>> doc_tokens,
                                         const Embedder& embedder, const TextRetrievalConfig& config = {},
                                         std::optional<uint32_t> exclude = std::nullopt);

std::vector<ScoredId> retrieve_texts(const std::string& query_text, std::span<const int32_t> query_tokens,
                                     const InvertedIndex& index, std::span<const std::vector<int32_t>> doc_tokens,
                                     const Embedder& embedder, const TextRetrievalConfig& config = {},
                                     std::optional<uint32_t> exclude = std::nullopt);

}  // namespace xmodal::retrieval

#endif  // XMODAL_RETRIEVAL_SEARCH_HPP_
