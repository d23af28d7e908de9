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

#include "xmodal/augment/translate.hpp"

#include <algorithm>
#include <map>

#include "spdlog/spdlog.h"

namespace xmodal::augment {
namespace {

std::vector<std::string> split(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const std::vector<std::string>& words, size_t b, size_t e) {
  std::string out;
  for (size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += words[i];
  }
  return out;
}

bool vowel(const std::string& w) { return !w.empty() && std::string_view("aeiou").find(w[0]) != std::string_view::npos; }

void fix_articles(std::vector<std::string>& words) {
  for (size_t i = 0; i + 1 < words.size(); ++i) {
    if (words[i] == "a" || words[i] == "an") words[i] = vowel(words[i + 1]) ? "an" : "a";
  }
}

const std::map<std::string, std::string>& synonyms() {
  static const std::map<std::string, std::string> table = {
      {"red", "crimson"},   {"blue", "azure"},     {"green", "emerald"},  {"yellow", "golden"},
      {"small", "little"},  {"large", "big"},      {"shiny", "glossy"},   {"old", "aged"},
      {"wooden", "timber"}, {"striped", "banded"}, {"ball", "sphere"},    {"table", "desk"},
      {"dog", "puppy"},     {"cat", "kitten"},     {"cup", "mug"},        {"chair", "seat"},
      {"boat", "ship"},     {"lamp", "lantern"},   {"on", "on top of"},   {"near", "close to"},
      {"beside", "alongside"}, {"under", "beneath"}, {"behind", "at the back of"}};
  return table;
}

// Relation phrase -> phrase with subject and object exchanged.
const std::vector<std::pair<std::vector<std::string>, std::string>>& inverses() {
  static const std::vector<std::pair<std::vector<std::string>, std::string>> table = {
      {{"in", "front", "of"}, "behind"}, {{"next", "to"}, "next to"}, {{"on"}, "under"},
      {{"under"}, "on"},                 {{"near"}, "near"},          {{"beside"}, "beside"},
      {{"behind"}, "in front of"}};
  return table;
}

bool is_article(const std::string& w) { return w == "a" || w == "an" || w == "the"; }

}  // namespace

std::string ParaphraseTranslator::apply_synonyms(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& w : split(text)) {
    const auto it = synonyms().find(w);
    if (it == synonyms().end()) {
      out.push_back(w);
    } else {
      for (auto& part : split(it->second)) out.push_back(std::move(part));
    }
  }
  fix_articles(out);
  return join(out, 0, out.size());
}

std::string ParaphraseTranslator::reorder(std::string_view text) {
  const auto words = split(text);
  const auto and_at = std::find(words.begin(), words.end(), "and");
  if (and_at != words.end() && and_at != words.begin() && and_at + 1 != words.end()) {
    const auto i = static_cast<size_t>(and_at - words.begin());
    return join(words, i + 1, words.size()) + " and " + join(words, 0, i);
  }
  for (size_t i = 1; i < words.size(); ++i) {
    for (const auto& [phrase, inverse] : inverses()) {
      const size_t n = phrase.size();
      if (i + n >= words.size() || !is_article(words[i + n])) continue;
      if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<ptrdiff_t>(i))) {
        return join(words, i + n, words.size()) + " " + inverse + " " + join(words, 0, i);
      }
    }
  }
  return std::string(text);
}

std::string ParaphraseTranslator::add_prefix(std::string_view text) {
  if (text.rfind("there is ", 0) == 0) return std::string(text);
  return "there is " + std::string(text);
}

std::optional<std::string> ParaphraseTranslator::translate(std::string_view text, std::string_view from,
                                                           std::string_view to) const {
  static const std::vector<std::string> known = default_pivots();
  if (from == "en") {
    if (std::find(known.begin(), known.end(), to) == known.end()) return std::nullopt;
    return "<" + std::string(to) + "> " + std::string(text);
  }
  if (to != "en") return std::nullopt;
  const std::string tag = "<" + std::string(from) + "> ";
  if (text.rfind(tag, 0) != 0) return std::nullopt;
  std::string s(text.substr(tag.size()));
  const bool syn = from == "de" || from == "ja" || from == "zh";
  const bool ord = from == "fr" || from == "ja" || from == "ru";
  const bool pre = from == "es" || from == "zh" || from == "ru";
  if (syn) s = apply_synonyms(s);
  if (ord) s = reorder(s);
  if (pre) s = add_prefix(s);
  return s;
}

const std::vector<std::string>& default_pivots() {
  static const std::vector<std::string> pivots = {"de", "fr", "es", "ja", "zh", "ru"};
  return pivots;
}

std::vector<std::string> back_translate(std::string_view caption, const Translator& translator,
                                        const std::vector<std::string>& pivots, size_t count) {
  std::vector<std::string> out;
  bool any_success = false;
  for (const auto& pivot : pivots) {
    if (out.size() >= count) break;
    const auto there = translator.translate(caption, "en", pivot);
    const auto back = there ? translator.translate(*there, pivot, "en") : std::nullopt;
    if (!back) {
      spdlog::warn("back_translate: pivot '{}' failed for '{}'", pivot, caption);
      continue;
    }
    any_success = true;
    if (*back != caption && std::find(out.begin(), out.end(), *back) == out.end()) out.push_back(*back);
  }
  if (out.empty() && any_success) out.emplace_back(caption);
  for (size_t i = 0; !out.empty() && out.size() < count; ++i) out.push_back(out[i]);
  if (out.size() < count) spdlog::warn("back_translate: only {} positives for '{}'", out.size(), caption);
  return out;
}

}  // namespace xmodal::augment
