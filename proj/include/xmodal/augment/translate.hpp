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

#ifndef XMODAL_AUGMENT_TRANSLATE_HPP_
#define XMODAL_AUGMENT_TRANSLATE_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal::augment {

// Machine translation between language codes. nullopt signals failure.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::optional<std::string> translate(std::string_view text, std::string_view from,
                                               std::string_view to) const = 0;
};

class IdentityTranslator : public Translator {
 public:
  std::optional<std::string> translate(std::string_view text, std::string_view, std::string_view) const override {
    return std::string(text);
  }
};

// Deterministic stand-in for a translation system. The outbound leg tags the
// text with the pivot; the return leg strips the tag and applies the pivot's
// rewrite rules:
//   de: synonyms        fr: reorder         es: "there is" prefix
//   ja: synonyms+reorder  zh: synonyms+prefix  ru: reorder+prefix
// Unknown pivots and untagged return input fail.
class ParaphraseTranslator : public Translator {
 public:
  std::optional<std::string> translate(std::string_view text, std::string_view from,
                                       std::string_view to) const override;

  // Word-level synonym table, then article agreement.
  static std::string apply_synonyms(std::string_view text);
  // Swaps the clauses around the first "and"; otherwise swaps the two sides
  // of the first relation, inverting it; otherwise returns the input.
  static std::string reorder(std::string_view text);
  static std::string add_prefix(std::string_view text);
};

const std::vector<std::string>& default_pivots();

// Round trips through each pivot in order and keeps outputs that differ from
// the caption and from each other until `count` are collected. When pivots
// run out, earlier outputs are repeated (or the caption itself when every
// round trip came back unchanged). Fewer than `count` only when every
// translation failed.
std::vector<std::string> back_translate(std::string_view caption, const Translator& translator,
                                        const std::vector<std::string>& pivots = default_pivots(),
                                        size_t count = 3);

}  // namespace xmodal::augment

#endif  // XMODAL_AUGMENT_TRANSLATE_HPP_
