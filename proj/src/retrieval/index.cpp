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

#include "xmodal/retrieval/index.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "xmodal/errors.hpp"

namespace xmodal::retrieval {
namespace {

static_assert(std::endian::native == std::endian::little, "index files assume a little-endian host");
constexpr char kMagic[8] = {'X', 'M', 'O', 'D', 'A', 'L', 'I', 'X'};

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw FormatError("index file truncated");
  return v;
}

// Normalizes in place, accumulating the squared norm in id order.
void l2_normalize(SparseVector& v) {
  double sq = 0;
  for (double w : v.weights) sq += w * w;
  if (sq == 0) {
    v = {};
    return;
  }
  const double norm = std::sqrt(sq);
  for (double& w : v.weights) w /= norm;
}

}  // namespace

std::vector<std::string> analyze(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 128 && std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = {
      "a",  "an", "and", "are", "as",  "at",   "be",  "by",    "for",  "from", "has", "in",   "is",
      "it", "its", "of", "on",  "that", "the", "to",  "was",   "were", "will", "with", "there"};
  return words;
}

bool is_stopword(std::string_view term) {
  const auto& s = stopwords();
  return std::find(s.begin(), s.end(), term) != s.end();
}

double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0;
  size_t i = 0, j = 0;
  while (i < a.ids.size() && j < b.ids.size()) {
    if (a.ids[i] < b.ids[j]) {
      ++i;
    } else if (a.ids[i] > b.ids[j]) {
      ++j;
    } else {
      s += a.weights[i++] * b.weights[j++];
    }
  }
  return s;
}

InvertedIndex InvertedIndex::build(const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, std::map<uint32_t, uint32_t>> table;
  for (size_t d = 0; d < docs.size(); ++d) {
    for (const auto& term : docs[d]) ++table[term][static_cast<uint32_t>(d)];
  }
  InvertedIndex index;
  index.num_docs_ = docs.size();
  for (const auto& [term, counts] : table) {
    index.terms_.push_back(term);
    auto& list = index.postings_.emplace_back();
    for (const auto& [doc, tf] : counts) list.push_back({doc, tf});
  }
  index.finalize();
  return index;
}

void InvertedIndex::finalize() {
  doc_vectors_.assign(num_docs_, {});
  for (uint32_t t = 0; t < terms_.size(); ++t) {
    const double w_idf = idf(t);
    if (w_idf == 0) continue;
    for (const Posting& p : postings_[t]) {
      doc_vectors_[p.doc].ids.push_back(t);
      doc_vectors_[p.doc].weights.push_back(std::log(1.0 + p.tf) * w_idf);
    }
  }
  for (auto& v : doc_vectors_) l2_normalize(v);
}

std::optional<uint32_t> InvertedIndex::term_id(std::string_view term) const {
  const auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
  if (it == terms_.end() || *it != term) return std::nullopt;
  return static_cast<uint32_t>(it - terms_.begin());
}

std::span<const Posting> InvertedIndex::postings(uint32_t term) const { return postings_.at(term); }

double InvertedIndex::idf(uint32_t term) const {
  return std::log(static_cast<double>(num_docs_) / static_cast<double>(df(term)));
}

SparseVector InvertedIndex::vectorize(const std::vector<std::string>& terms) const {
  std::map<uint32_t, uint32_t> tf;
  for (const auto& t : terms) {
    if (auto id = term_id(t)) ++tf[*id];
  }
  SparseVector v;
  for (const auto& [id, n] : tf) {
    const double w = std::log(1.0 + n) * idf(id);
    if (w == 0) continue;
    v.ids.push_back(id);
    v.weights.push_back(w);
  }
  l2_normalize(v);
  return v;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("index: cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kIndexFileVersion);
  put<uint64_t>(out, num_docs_);
  put<uint64_t>(out, terms_.size());
  for (size_t t = 0; t < terms_.size(); ++t) {
    put<uint32_t>(out, static_cast<uint32_t>(terms_[t].size()));
    out.write(terms_[t].data(), static_cast<std::streamsize>(terms_[t].size()));
    put<uint32_t>(out, static_cast<uint32_t>(postings_[t].size()));
    for (const Posting& p : postings_[t]) {
      put<uint32_t>(out, p.doc);
      put<uint32_t>(out, p.tf);
    }
  }
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("index: cannot read " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("index: bad magic");
  }
  if (get<uint32_t>(in) != kIndexFileVersion) throw VersionMismatchError("index: unsupported version");
  InvertedIndex index;
  index.num_docs_ = get<uint64_t>(in);
  const auto n_terms = get<uint64_t>(in);
  for (uint64_t t = 0; t < n_terms; ++t) {
    std::string term(get<uint32_t>(in), '\0');
    if (!in.read(term.data(), static_cast<std::streamsize>(term.size()))) throw FormatError("index file truncated");
    if (!index.terms_.empty() && !(index.terms_.back() < term)) throw FormatError("index: terms out of order");
    index.terms_.push_back(std::move(term));
    auto& list = index.postings_.emplace_back(get<uint32_t>(in));
    for (Posting& p : list) {
      p.doc = get<uint32_t>(in);
      p.tf = get<uint32_t>(in);
      if (p.doc >= index.num_docs_ || p.tf == 0) throw FormatError("index: corrupt posting");
    }
    for (size_t i = 1; i < list.size(); ++i) {
      if (list[i - 1].doc >= list[i].doc) throw FormatError("index: postings out of order");
    }
    if (list.empty()) throw FormatError("index: empty posting list");
  }
  index.finalize();
  return index;
}

}  // namespace xmodal::retrieval
