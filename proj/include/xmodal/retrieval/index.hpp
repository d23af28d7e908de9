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

#ifndef XMODAL_RETRIEVAL_INDEX_HPP_
#define XMODAL_RETRIEVAL_INDEX_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal::retrieval {

// Lowercased ASCII alphanumeric runs; every other byte separates terms.
std::vector<std::string> analyze(std::string_view text);

// The 25 stopwords ignored when collecting stage-1 candidates.
const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view term);

// Sparse vector with ascending term ids.
struct SparseVector {
  std::vector<uint32_t> ids;
  std::vector<double> weights;

  bool empty() const { return ids.empty(); }
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

// Sum of products over shared ids, accumulated in ascending id order.
double dot(const SparseVector& a, const SparseVector& b);

struct Posting {
  uint32_t doc = 0;
  uint32_t tf = 0;
  friend bool operator==(const Posting&, const Posting&) = default;
};

// Term -> postings over documents 0..N-1. Term ids follow the sorted order of
// the term strings, so ids (and every id-ordered sum) do not depend on the
// order documents were added in. TF-IDF weights are
//   w(t, d) = log(1 + tf) * log(N / df(t)),
// L2-normalized per vector; zero weights are dropped.
class InvertedIndex {
 public:
  InvertedIndex() = default;
  static InvertedIndex build(const std::vector<std::vector<std::string>>& docs);

  size_t num_docs() const { return num_docs_; }
  size_t num_terms() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  std::optional<uint32_t> term_id(std::string_view term) const;
  std::span<const Posting> postings(uint32_t term) const;
  size_t df(uint32_t term) const { return postings(term).size(); }
  double idf(uint32_t term) const;

  // TF-IDF vector of a query; terms absent from the index are ignored.
  SparseVector vectorize(const std::vector<std::string>& terms) const;
  const SparseVector& doc_vector(uint32_t doc) const { return doc_vectors_.at(doc); }

  // Single file: magic "XMODALIX", u32 version, u64 document count, u64 term
  // count, then per term (u32 byte length, bytes, u32 posting count,
  // postings as u32 doc, u32 tf). Little-endian.
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  friend bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
    return a.num_docs_ == b.num_docs_ && a.terms_ == b.terms_ && a.postings_ == b.postings_;
  }

 private:
  void finalize();

  size_t num_docs_ = 0;
  std::vector<std::string> terms_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<SparseVector> doc_vectors_;
};

inline constexpr uint32_t kIndexFileVersion = 1;

}  // namespace xmodal::retrieval

#endif  // XMODAL_RETRIEVAL_INDEX_HPP_
