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

#ifndef XMODAL_TESTS_SUPPORT_RETRIEVAL_ORACLE_HPP_
#define XMODAL_TESTS_SUPPORT_RETRIEVAL_ORACLE_HPP_

// Brute-force retrieval references, coded directly over term strings with
// ordered maps and without any of the library's index structures.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace xmodal::testing {

using TermWeights = std::map<std::string, double>;

struct OracleCorpus {
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, int> df;
  std::vector<TermWeights> vectors;
};

inline TermWeights oracle_weights(const std::vector<std::string>& terms, const std::map<std::string, int>& df,
                                  size_t n_docs) {
  std::map<std::string, int> tf;
  for (const auto& t : terms) {
    if (df.count(t)) ++tf[t];
  }
  TermWeights w;
  double sq = 0;
  for (const auto& [t, n] : tf) {
    const double v = std::log(1.0 + n) * std::log(static_cast<double>(n_docs) / static_cast<double>(df.at(t)));
    if (v == 0) continue;
    w[t] = v;
    sq += v * v;
  }
  if (sq == 0) return {};
  const double norm = std::sqrt(sq);
  for (auto& [t, v] : w) v /= norm;
  return w;
}

inline OracleCorpus oracle_corpus(const std::vector<std::vector<std::string>>& docs) {
  OracleCorpus c;
  c.docs = docs;
  for (const auto& d : docs) {
    for (const auto& t : std::set<std::string>(d.begin(), d.end())) ++c.df[t];
  }
  for (const auto& d : docs) c.vectors.push_back(oracle_weights(d, c.df, docs.size()));
  return c;
}

inline double oracle_cosine(const TermWeights& a, const TermWeights& b) {
  double s = 0;
  for (const auto& [t, v] : a) {
    const auto it = b.find(t);
    if (it != b.end()) s += v * it->second;
  }
  return s;
}

struct Ranked {
  uint32_t id;
  double score;
};

inline std::vector<Ranked> oracle_rank(std::vector<Ranked> items, size_t k) {
  std::sort(items.begin(), items.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (items.size() > k) items.resize(k);
  return items;
}

inline std::vector<Ranked> oracle_top_k(const OracleCorpus& c, const TermWeights& q, size_t k,
                                        std::optional<uint32_t> exclude) {
  std::vector<Ranked> all;
  for (uint32_t d = 0; d < c.docs.size(); ++d) {
    if (exclude && *exclude == d) continue;
    all.push_back({d, oracle_cosine(q, c.vectors[d])});
  }
  return oracle_rank(std::move(all), k);
}

}  // namespace xmodal::testing

#endif  // XMODAL_TESTS_SUPPORT_RETRIEVAL_ORACLE_HPP_
