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

#include "xmodal/augment/fluency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xmodal/errors.hpp"
#include "xmodal/retrieval/index.hpp"

namespace xmodal::augment {
namespace {

uint64_t key2(uint32_t a, uint32_t b) { return (static_cast<uint64_t>(a) << 32) | b; }

// Word ids are below 2^21 in any realistic corpus; three fit in 64 bits.
uint64_t key3(uint32_t a, uint32_t b, uint32_t c) {
  return (static_cast<uint64_t>(a) << 42) | (static_cast<uint64_t>(b) << 21) | c;
}

}  // namespace

FluencyModel FluencyModel::train(const std::vector<std::string>& sentences, double discount) {
  if (!(discount > 0 && discount < 1)) throw ConfigError("fluency: discount must lie in (0, 1)");
  FluencyModel m;
  m.discount_ = discount;
  m.words_ = {"<s>", "</s>", "<unk>"};
  std::set<std::string> vocab;
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& s : sentences) {
    tokenized.push_back(retrieval::analyze(s));
    vocab.insert(tokenized.back().begin(), tokenized.back().end());
  }
  if (vocab.size() >= (1u << 21) - 3) throw ConfigError("fluency: vocabulary too large");
  for (const auto& w : vocab) m.words_.push_back(w);
  for (uint32_t i = 0; i < m.words_.size(); ++i) m.ids_[m.words_[i]] = i;

  for (const auto& words : tokenized) {
    std::vector<uint32_t> ids{kBos, kBos};
    for (const auto& w : words) ids.push_back(m.ids_.at(w));
    ids.push_back(kEos);
    for (size_t i = 2; i < ids.size(); ++i) {
      if (m.tri_[key3(ids[i - 2], ids[i - 1], ids[i])]++ == 0) {
        ++m.tri_types_[key2(ids[i - 2], ids[i - 1])];
        if (m.bi_[key2(ids[i - 1], ids[i])]++ == 0) {
          ++m.bi_types_[ids[i - 1]];
          if (m.uni_[ids[i]]++ == 0) ++m.uni_types_;
          ++m.uni_total_;
        }
        ++m.bi_ctx_[ids[i - 1]];
      }
      ++m.tri_ctx_[key2(ids[i - 2], ids[i - 1])];
    }
  }
  return m;
}

uint32_t FluencyModel::word_id(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

double FluencyModel::prob_unigram(uint32_t w) const {
  // <s> is never predicted, so the uniform floor spreads over the rest.
  const double uniform = 1.0 / static_cast<double>(words_.size() - 1);
  if (uni_total_ == 0) return uniform;
  const auto it = uni_.find(w);
  const double c = it == uni_.end() ? 0.0 : it->second;
  const double total = static_cast<double>(uni_total_);
  return std::max(c - discount_, 0.0) / total + discount_ * static_cast<double>(uni_types_) / total * uniform;
}

double FluencyModel::prob_bigram(uint32_t v, uint32_t w) const {
  const auto ctx = bi_ctx_.find(v);
  if (ctx == bi_ctx_.end()) return prob_unigram(w);
  const double total = ctx->second;
  const auto it = bi_.find(key2(v, w));
  const double c = it == bi_.end() ? 0.0 : it->second;
  return std::max(c - discount_, 0.0) / total +
         discount_ * static_cast<double>(bi_types_.at(v)) / total * prob_unigram(w);
}

double FluencyModel::prob(uint32_t u, uint32_t v, uint32_t w) const {
  const auto ctx = tri_ctx_.find(key2(u, v));
  if (ctx == tri_ctx_.end()) return prob_bigram(v, w);
  const double total = ctx->second;
  const auto it = tri_.find(key3(u, v, w));
  const double c = it == tri_.end() ? 0.0 : it->second;
  return std::max(c - discount_, 0.0) / total +
         discount_ * static_cast<double>(tri_types_.at(key2(u, v))) / total * prob_bigram(v, w);
}

double FluencyModel::score(std::string_view sentence) const {
  std::vector<uint32_t> ids{kBos, kBos};
  for (const auto& w : retrieval::analyze(sentence)) ids.push_back(word_id(w));
  ids.push_back(kEos);
  double total = 0;
  for (size_t i = 2; i < ids.size(); ++i) total += std::log(prob(ids[i - 2], ids[i - 1], ids[i]));
  return total / static_cast<double>(ids.size() - 2);
}

std::vector<std::string> rank_by_fluency(const std::vector<std::string>& candidates, const FluencyModel& model,
                                         size_t keep) {
  std::vector<double> scores;
  for (const auto& c : candidates) scores.push_back(model.score(c));
  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  if (order.size() > keep) order.resize(keep);
  std::vector<std::string> out;
  for (size_t i : order) out.push_back(candidates[i]);
  return out;
}

}  // namespace xmodal::augment
