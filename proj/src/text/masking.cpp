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

#include "xmodal/text/masking.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/errors.hpp"

namespace xmodal::text {
namespace {

struct Unit {
  Span tokens;
  int64_t words = 0;
};

// Words grouped so that each phrase is one indivisible unit.
std::vector<Unit> masking_units(const TokenSequence& seq) {
  std::vector<Unit> units;
  size_t p = 0;
  for (size_t w = 0; w < seq.words.size();) {
    while (p < seq.phrases.size() && seq.phrases[p].start < seq.words[w].start) ++p;
    if (p < seq.phrases.size() && seq.phrases[p].start == seq.words[w].start) {
      Unit u{seq.phrases[p], 0};
      while (w < seq.words.size() && seq.words[w].end <= u.tokens.end) {
        ++u.words;
        ++w;
      }
      units.push_back(u);
    } else {
      units.push_back({seq.words[w], 1});
      ++w;
    }
  }
  return units;
}

}  // namespace

std::vector<int32_t> MaskingPlan::apply(const std::vector<int32_t>& ids) const {
  std::vector<int32_t> out = ids;
  for (size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= out.size()) throw ContractError("masking plan: position outside sequence");
    out[positions[i]] = replacements[i];
  }
  return out;
}

MaskingPlan sample_bidirectional_mask(const TokenSequence& seq, size_t vocab_size,
                                      numerics::RngState& rng, const MaskingConfig& config) {
  if (vocab_size <= static_cast<size_t>(kReservedCount)) {
    throw ConfigError("masking: vocabulary has no non-reserved ids");
  }
  MaskingPlan plan;
  const std::vector<Unit> units = masking_units(seq);
  if (units.empty()) return plan;

  const double needed = config.budget * static_cast<double>(seq.interior());
  std::vector<bool> taken(units.size(), false);
  size_t selected = 0;
  std::vector<size_t> open;
  while (static_cast<double>(selected) < needed) {
    const int64_t span_words = std::min(rng.geometric(config.span_p), config.max_span_words);
    open.clear();
    for (size_t u = 0; u < units.size(); ++u) {
      if (!taken[u]) open.push_back(u);
    }
    if (open.empty()) break;
    size_t u = open[rng.uniform_int(open.size())];
    Span span{units[u].tokens.start, units[u].tokens.start};
    for (int64_t words = 0; u < units.size() && !taken[u] && words < span_words; ++u) {
      taken[u] = true;
      words += units[u].words;
      selected += units[u].tokens.length();
      span.end = units[u].tokens.end;
    }
    plan.spans.push_back(span);
  }
  std::sort(plan.spans.begin(), plan.spans.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });

  for (size_t u = 0; u < units.size(); ++u) {
    if (!taken[u]) continue;
    for (size_t pos = units[u].tokens.start; pos < units[u].tokens.end; ++pos) plan.positions.push_back(pos);
  }
  const auto random_range = static_cast<uint64_t>(vocab_size - kReservedCount);
  for (size_t pos : plan.positions) {
    const double r = rng.uniform();
    plan.targets.push_back(seq.ids[pos]);
    if (r < config.mask_prob) {
      plan.actions.push_back(MaskAction::kMaskToken);
      plan.replacements.push_back(kMask);
    } else if (r < config.mask_prob + config.random_prob) {
      plan.actions.push_back(MaskAction::kRandomToken);
      plan.replacements.push_back(kReservedCount + static_cast<int32_t>(rng.uniform_int(random_range)));
    } else {
      plan.actions.push_back(MaskAction::kKeep);
      plan.replacements.push_back(seq.ids[pos]);
    }
  }
  return plan;
}

std::optional<Seq2SeqSplit> sample_seq2seq_split(const TokenSequence& seq, numerics::RngState& rng,
                                                 const Seq2SeqConfig& config) {
  const size_t interior = seq.interior();
  if (interior < static_cast<size_t>(config.min_fragment)) return std::nullopt;
  const size_t n = seq.ids.size();
  const auto needed = static_cast<size_t>(std::ceil(config.budget * static_cast<double>(interior)));

  // free_run[s]: free positions starting at s (interior only).
  std::vector<bool> used(n, false);
  std::vector<size_t> free_run(n + 1, 0);
  std::vector<size_t> starts;
  Seq2SeqSplit split;
  size_t selected = 0;
  while (selected < needed) {
    const auto drawn = static_cast<size_t>(rng.uniform_range(config.min_fragment, config.max_fragment));
    size_t len = std::min(drawn, needed - selected);
    size_t longest = 0;
    free_run[n - 1] = 0;
    for (size_t s = n - 1; s-- > 1;) {
      free_run[s] = used[s] ? 0 : free_run[s + 1] + 1;
      longest = std::max(longest, free_run[s]);
    }
    len = std::min(len, longest);
    starts.clear();
    for (size_t s = 1; s + 1 < n; ++s) {
      if (free_run[s] >= len) starts.push_back(s);
    }
    const size_t start = starts[rng.uniform_int(starts.size())];
    for (size_t i = start; i < start + len; ++i) used[i] = true;
    split.fragments.push_back({start, start + len});
    selected += len;
  }
  std::sort(split.fragments.begin(), split.fragments.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });

  split.source.push_back(kCls);
  for (size_t i = 1; i + 1 < n; ++i) {
    if (!used[i]) split.source.push_back(seq.ids[i]);
  }
  split.source.push_back(kSep);
  for (const Span& f : split.fragments) {
    split.target.push_back(kCls);
    split.target.insert(split.target.end(), seq.ids.begin() + static_cast<ptrdiff_t>(f.start),
                        seq.ids.begin() + static_cast<ptrdiff_t>(f.end));
    split.target.push_back(kSep);
  }
  return split;
}

std::vector<int32_t> Seq2SeqSplit::reconstruct() const {
  size_t fragment_tokens = 0;
  for (const Span& f : fragments) fragment_tokens += f.length();
  if (target.size() != fragment_tokens + 2 * fragments.size()) {
    throw ContractError("seq2seq split: target does not match fragment table");
  }
  const size_t total = source.size() + fragment_tokens;
  std::vector<int32_t> out;
  out.reserve(total);
  size_t s = 0, t = 0, f = 0;
  while (out.size() < total) {
    if (f < fragments.size() && out.size() == fragments[f].start) {
      out.insert(out.end(), target.begin() + static_cast<ptrdiff_t>(t + 1),
                 target.begin() + static_cast<ptrdiff_t>(t + 1 + fragments[f].length()));
      t += fragments[f].length() + 2;
      ++f;
    } else {
      if (s >= source.size()) throw ContractError("seq2seq split: source exhausted");
      out.push_back(source[s++]);
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const MaskingPlan& p) {
  std::vector<int> actions;
  for (MaskAction a : p.actions) actions.push_back(static_cast<int>(a));
  j = {{"positions", p.positions}, {"actions", actions}, {"targets", p.targets},
       {"replacements", p.replacements}, {"spans", p.spans}};
}

void from_json(const nlohmann::json& j, MaskingPlan& p) {
  j.at("positions").get_to(p.positions);
  p.actions.clear();
  for (int a : j.at("actions").get<std::vector<int>>()) {
    if (a < 0 || a > 2) throw FormatError("masking plan: unknown action");
    p.actions.push_back(static_cast<MaskAction>(a));
  }
  j.at("targets").get_to(p.targets);
  j.at("replacements").get_to(p.replacements);
  j.at("spans").get_to(p.spans);
}

void to_json(nlohmann::json& j, const Seq2SeqSplit& s) {
  j = {{"source", s.source}, {"target", s.target}, {"fragments", s.fragments}};
}

void from_json(const nlohmann::json& j, Seq2SeqSplit& s) {
  j.at("source").get_to(s.source);
  j.at("target").get_to(s.target);
  j.at("fragments").get_to(s.fragments);
}

}  // namespace xmodal::text
