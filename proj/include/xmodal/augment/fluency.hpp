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

#ifndef XMODAL_AUGMENT_FLUENCY_HPP_
#define XMODAL_AUGMENT_FLUENCY_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xmodal::augment {

// Interpolated Kneser-Ney trigram model over analyzed words. The unigram
// level is interpolated with a uniform distribution over the known words plus
// </s> and <unk>, so every sequence has a finite log-probability.
class FluencyModel {
 public:
  static FluencyModel train(const std::vector<std::string>& sentences, double discount = 0.75);

  // P(w | u, v) over word ids; see word_id().
  double prob(uint32_t u, uint32_t v, uint32_t w) const;
  // Mean natural-log probability per predicted token (words plus </s>).
  double score(std::string_view sentence) const;

  uint32_t word_id(std::string_view word) const;
  // Known words plus <s>, </s>, <unk>.
  size_t vocabulary_size() const { return words_.size(); }
  double discount() const { return discount_; }

  static constexpr uint32_t kBos = 0;
  static constexpr uint32_t kEos = 1;
  static constexpr uint32_t kUnk = 2;

 private:
  double prob_unigram(uint32_t w) const;
  double prob_bigram(uint32_t v, uint32_t w) const;

  double discount_ = 0.75;
  std::vector<std::string> words_;
  std::unordered_map<std::string, uint32_t> ids_;
  // Trigram level: c(uvw), c(uv.), N1+(uv.).
  std::unordered_map<uint64_t, uint32_t> tri_;
  std::unordered_map<uint64_t, uint32_t> tri_ctx_;
  std::unordered_map<uint64_t, uint32_t> tri_types_;
  // Bigram level on continuation counts: N1+(.vw), N1+(.v.), N1+(v.).
  std::unordered_map<uint64_t, uint32_t> bi_;
  std::unordered_map<uint32_t, uint32_t> bi_ctx_;
  std::unordered_map<uint32_t, uint32_t> bi_types_;
  // Unigram level: N1+(.w), N1+(..), number of w with N1+(.w) > 0.
  std::unordered_map<uint32_t, uint32_t> uni_;
  uint64_t uni_total_ = 0;
  uint64_t uni_types_ = 0;
};

// Stable sort by descending score; the first `keep` candidates.
std::vector<std::string> rank_by_fluency(const std::vector<std::string>& candidates, const FluencyModel& model,
                                         size_t keep);

}  // namespace xmodal::augment

#endif  // XMODAL_AUGMENT_FLUENCY_HPP_
