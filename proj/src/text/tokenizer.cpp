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

#include "xmodal/text/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "xmodal/errors.hpp"

namespace xmodal::text {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  for (std::string_view chunk : split_chunks(s)) {
    std::string w = trim(chunk);
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

bool capitalized(const std::string& w) {
  return !w.empty() && std::isupper(static_cast<unsigned char>(w[0]));
}

}  // namespace

LexiconPhraseDetector::LexiconPhraseDetector(std::vector<std::string> lexicon) {
  for (const auto& entry : lexicon) {
    auto words = split_words(lowercase(entry));
    if (words.size() >= 2) entries_.push_back(std::move(words));
  }
}

std::vector<Span> LexiconPhraseDetector::detect(const std::vector<std::string>& words) const {
  std::vector<std::string> lower;
  lower.reserve(words.size());
  for (const auto& w : words) lower.push_back(lowercase(w));

  std::vector<Span> spans;
  size_t i = 0;
  while (i < words.size()) {
    size_t best = 0;
    for (const auto& entry : entries_) {
      if (entry.size() > best && i + entry.size() <= words.size() &&
          std::equal(entry.begin(), entry.end(), lower.begin() + static_cast<ptrdiff_t>(i))) {
        best = entry.size();
      }
    }
    size_t run = 0;
    while (i + run < words.size() && capitalized(words[i + run])) ++run;
    if (run >= 2) best = std::max(best, run);
    if (best >= 2) {
      spans.push_back({i, i + best});
      i += best;
    } else {
      ++i;
    }
  }
  return spans;
}

std::vector<std::string> word_texts(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(seq.words.size());
  for (const Span& w : seq.words) {
    out.push_back(trim(vocab.decode(std::span<const int32_t>(seq.ids).subspan(w.start, w.length()))));
  }
  return out;
}

std::vector<Span> detect_phrases(const TokenSequence& seq, const Vocabulary& vocab,
                                 const PhraseDetector& detector) {
  std::vector<Span> out;
  for (const Span& s : detector.detect(word_texts(seq, vocab))) {
    if (s.start >= s.end || s.end > seq.words.size()) {
      throw ContractError("detect_phrases: detector returned a span outside the sequence");
    }
    out.push_back({seq.words[s.start].start, seq.words[s.end - 1].end});
  }
  return out;
}

std::vector<Span> detect_phrases(const TokenSequence& seq, const Vocabulary& vocab,
                                 const std::vector<std::string>& lexicon) {
  return detect_phrases(seq, vocab, LexiconPhraseDetector(lexicon));
}

Tokenizer::Tokenizer(Vocabulary vocab, size_t max_length, std::shared_ptr<const PhraseDetector> detector)
    : vocab_(std::move(vocab)), max_length_(max_length), detector_(std::move(detector)) {
  if (max_length_ < 3) throw ConfigError("tokenizer: max_length must be at least 3");
  if (!detector_) detector_ = std::make_shared<LexiconPhraseDetector>();
}

TokenSequence Tokenizer::encode(std::string_view text) const {
  TokenSequence seq;
  seq.ids.push_back(kCls);
  for (std::string_view chunk : split_chunks(text)) {
    const auto ids = vocab_.encode_chunk(chunk);
    if (seq.ids.size() + ids.size() + 1 > max_length_) break;
    seq.words.push_back({seq.ids.size(), seq.ids.size() + ids.size()});
    seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  }
  seq.ids.push_back(kSep);
  seq.phrases = detect_phrases(seq, vocab_, *detector_);
  return seq;
}

void to_json(nlohmann::json& j, const Span& s) { j = nlohmann::json::array({s.start, s.end}); }
void from_json(const nlohmann::json& j, Span& s) {
  s.start = j.at(0).get<size_t>();
  s.end = j.at(1).get<size_t>();
}

void to_json(nlohmann::json& j, const TokenSequence& s) {
  j = {{"ids", s.ids}, {"words", s.words}, {"phrases", s.phrases}};
}
void from_json(const nlohmann::json& j, TokenSequence& s) {
  j.at("ids").get_to(s.ids);
  j.at("words").get_to(s.words);
  j.at("phrases").get_to(s.phrases);
}

}  // namespace xmodal::text
