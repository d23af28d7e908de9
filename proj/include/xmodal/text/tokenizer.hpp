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

#ifndef XMODAL_TEXT_TOKENIZER_HPP_
#define XMODAL_TEXT_TOKENIZER_HPP_

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xmodal/text/vocabulary.hpp"

namespace xmodal::text {

// Half-open [start, end) range.
struct Span {
  size_t start = 0;
  size_t end = 0;
  size_t length() const { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

// [CLS] w_1 .. w_n [SEP]. Word and phrase spans index into ids; words
// partition the interior [1, ids.size() - 1).
struct TokenSequence {
  std::vector<int32_t> ids;
  std::vector<Span> words;
  std::vector<Span> phrases;

  size_t interior() const { return ids.size() < 2 ? 0 : ids.size() - 2; }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Finds multiword phrases over a list of words; spans are word-index ranges.
class PhraseDetector {
 public:
  virtual ~PhraseDetector() = default;
  virtual std::vector<Span> detect(const std::vector<std::string>& words) const = 0;
};

// Non-overlapping leftmost-longest matches of lexicon entries (compared
// case-insensitively, word by word) merged with maximal runs of two or more
// capitalized words.
class LexiconPhraseDetector : public PhraseDetector {
 public:
  explicit LexiconPhraseDetector(std::vector<std::string> lexicon = {});
  std::vector<Span> detect(const std::vector<std::string>& words) const override;

 private:
  std::vector<std::vector<std::string>> entries_;
};

// Whitespace-trimmed surface text of every word in seq.
std::vector<std::string> word_texts(const TokenSequence& seq, const Vocabulary& vocab);

// Phrase spans over token positions for a tokenized sequence.
std::vector<Span> detect_phrases(const TokenSequence& seq, const Vocabulary& vocab,
                                 const std::vector<std::string>& lexicon);
std::vector<Span> detect_phrases(const TokenSequence& seq, const Vocabulary& vocab,
                                 const PhraseDetector& detector);

class Tokenizer {
 public:
  // max_length counts [CLS] and [SEP]; default desk scale is 64.
  explicit Tokenizer(Vocabulary vocab, size_t max_length = 64,
                     std::shared_ptr<const PhraseDetector> detector = nullptr);

  // Words that do not fit within max_length are dropped whole.
  TokenSequence encode(std::string_view text) const;
  std::string decode(std::span<const int32_t> ids) const { return vocab_.decode(ids); }

  const Vocabulary& vocabulary() const { return vocab_; }
  size_t max_length() const { return max_length_; }

 private:
  Vocabulary vocab_;
  size_t max_length_;
  std::shared_ptr<const PhraseDetector> detector_;
};

void to_json(nlohmann::json& j, const Span& s);
void from_json(const nlohmann::json& j, Span& s);
void to_json(nlohmann::json& j, const TokenSequence& s);
void from_json(const nlohmann::json& j, TokenSequence& s);

}  // namespace xmodal::text

#endif  // XMODAL_TEXT_TOKENIZER_HPP_
