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

#ifndef XMODAL_TEXT_MASKING_HPP_
#define XMODAL_TEXT_MASKING_HPP_

#include <optional>
#include <vector>

#include "json.hpp"
#include "xmodal/numerics/rng.hpp"
#include "xmodal/text/tokenizer.hpp"

namespace xmodal::text {

enum class MaskAction : uint8_t { kMaskToken = 0, kRandomToken = 1, kKeep = 2 };

// Positions are ascending; actions, targets and replacements run parallel to
// them. replacements[i] is the id fed to the model at positions[i].
struct MaskingPlan {
  std::vector<size_t> positions;
  std::vector<MaskAction> actions;
  std::vector<int32_t> targets;
  std::vector<int32_t> replacements;
  // Selected word/phrase units, as token spans.
  std::vector<Span> spans;

  bool empty() const { return positions.empty(); }
  // Input ids with the plan applied.
  std::vector<int32_t> apply(const std::vector<int32_t>& ids) const;
  friend bool operator==(const MaskingPlan&, const MaskingPlan&) = default;
};

struct MaskingConfig {
  double span_p = 0.2;
  int64_t max_span_words = 10;
  double budget = 0.15;
  double mask_prob = 0.8;
  double random_prob = 0.1;
};

// Span masking over whole words and phrases. Spans of Geo(span_p) words,
// truncated at max_span_words, start at a uniformly chosen unselected unit and
// grow rightwards, snapped outward to phrase boundaries, until at least
// budget of the interior tokens are selected. Random replacements are drawn
// uniformly from the non-reserved ids below vocab_size.
MaskingPlan sample_bidirectional_mask(const TokenSequence& seq, size_t vocab_size,
                                      numerics::RngState& rng, const MaskingConfig& config = {});

// S = [CLS] remainder [SEP]; T = ([CLS] fragment [SEP])* in original order.
struct Seq2SeqSplit {
  std::vector<int32_t> source;
  std::vector<int32_t> target;
  // Fragment token spans over the original sequence, ascending.
  std::vector<Span> fragments;

  // Original sequence rebuilt from source, target and fragment positions.
  std::vector<int32_t> reconstruct() const;
  friend bool operator==(const Seq2SeqSplit&, const Seq2SeqSplit&) = default;
};

struct Seq2SeqConfig {
  int64_t min_fragment = 4;
  int64_t max_fragment = 32;
  double budget = 0.25;
};

// Removes non-overlapping fragments of U(min, max) tokens until the budget is
// met; the last fragment is cut to what the budget still needs. nullopt when
// the interior is shorter than min_fragment.
std::optional<Seq2SeqSplit> sample_seq2seq_split(const TokenSequence& seq, numerics::RngState& rng,
                                                 const Seq2SeqConfig& config = {});

void to_json(nlohmann::json& j, const MaskingPlan& p);
void from_json(const nlohmann::json& j, MaskingPlan& p);
void to_json(nlohmann::json& j, const Seq2SeqSplit& s);
void from_json(const nlohmann::json& j, Seq2SeqSplit& s);

}  // namespace xmodal::text

#endif  // XMODAL_TEXT_MASKING_HPP_
