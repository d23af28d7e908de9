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

#include "xmodal/text/vocabulary.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal::text {
namespace {

constexpr std::string_view kHeader = "#xmodal-bpe v1";
const char* const kReservedNames[kReservedCount] = {"[PAD]", "[CLS]", "[SEP]", "[IMG]", "[MASK]"};

uint64_t pair_key(int32_t a, int32_t b) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Replaces every left-to-right occurrence of (a, b) by merged.
void apply_merge(std::vector<int32_t>& ids, int32_t a, int32_t b, int32_t merged) {
  size_t w = 0;
  for (size_t r = 0; r < ids.size(); ++r) {
    if (r + 1 < ids.size() && ids[r] == a && ids[r + 1] == b) {
      ids[w++] = merged;
      ++r;
    } else {
      ids[w++] = ids[r];
    }
  }
  ids.resize(w);
}

std::vector<int32_t> bytes_of(std::string_view s) {
  std::vector<int32_t> ids;
  ids.reserve(s.size());
  for (unsigned char c : s) ids.push_back(kByteBase + c);
  return ids;
}

}  // namespace

std::vector<std::string_view> split_chunks(std::string_view text) {
  std::vector<std::string_view> chunks;
  size_t i = 0;
  while (i < text.size()) {
    const size_t start = i;
    while (i < text.size() && is_space(text[i])) ++i;
    while (i < text.size() && !is_space(text[i])) ++i;
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<Merge>{}) {}

Vocabulary::Vocabulary(std::vector<Merge> merges) : merges_(std::move(merges)) {
  tokens_.reserve(kFirstMergeId + merges_.size());
  for (const char* name : kReservedNames) tokens_.emplace_back(name);
  for (int c = 0; c < 256; ++c) tokens_.emplace_back(1, static_cast<char>(c));
  for (const Merge& m : merges_) {
    const auto next = static_cast<int32_t>(tokens_.size());
    if (m.left < kByteBase || m.right < kByteBase || m.left >= next || m.right >= next) {
      throw FormatError("vocabulary: merge refers to an unknown or reserved id");
    }
    if (!merge_ids_.emplace(pair_key(m.left, m.right), next).second) {
      throw FormatError("vocabulary: duplicate merge");
    }
    tokens_.push_back(tokens_[m.left] + tokens_[m.right]);
  }
}

const std::string& Vocabulary::token(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
    throw InputError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

std::vector<int32_t> Vocabulary::encode_chunk(std::string_view chunk) const {
  std::vector<int32_t> ids = bytes_of(chunk);
  while (ids.size() > 1) {
    int32_t best = -1;
    size_t best_at = 0;
    for (size_t i = 0; i + 1 < ids.size(); ++i) {
      const auto it = merge_ids_.find(pair_key(ids[i], ids[i + 1]));
      if (it != merge_ids_.end() && (best < 0 || it->second < best)) {
        best = it->second;
        best_at = i;
      }
    }
    if (best < 0) break;
    apply_merge(ids, ids[best_at], ids[best_at + 1], best);
  }
  return ids;
}

std::vector<int32_t> Vocabulary::encode(std::string_view text) const {
  std::vector<int32_t> out;
  for (std::string_view chunk : split_chunks(text)) {
    const auto ids = encode_chunk(chunk);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string Vocabulary::decode(std::span<const int32_t> ids) const {
  std::string out;
  for (int32_t id : ids) {
    if (!is_reserved(id)) out += token(id);
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::ostringstream os;
  os << kHeader << '\n';
  for (int32_t i = 0; i < kReservedCount; ++i) os << "reserved " << i << ' ' << kReservedNames[i] << '\n';
  for (const Merge& m : merges_) os << m.left << ' ' << m.right << '\n';
  return os.str();
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line)) throw FormatError("vocabulary: empty file");
  if (line.rfind("#xmodal-bpe", 0) != 0) throw FormatError("vocabulary: missing header");
  if (line != kHeader) throw VersionMismatchError("vocabulary: unsupported version '" + line + "'");
  std::vector<Merge> merges;
  int32_t reserved_seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line.rfind("reserved ", 0) == 0) {
      std::string tag, name;
      int32_t id = -1;
      ls >> tag >> id >> name;
      if (id != reserved_seen || id >= kReservedCount || name != kReservedNames[id]) {
        throw FormatError("vocabulary: reserved table does not match this build");
      }
      ++reserved_seen;
      continue;
    }
    Merge m;
    if (!(ls >> m.left >> m.right)) throw FormatError("vocabulary: bad merge line '" + line + "'");
    merges.push_back(m);
  }
  if (reserved_seen != kReservedCount) throw FormatError("vocabulary: reserved table incomplete");
  return Vocabulary(std::move(merges));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("vocabulary: cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("vocabulary: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

Vocabulary train_bpe(std::span<const std::string> corpus, size_t target_size) {
  if (corpus.empty()) throw InputError("train_bpe: empty corpus");
  if (target_size <= static_cast<size_t>(kFirstMergeId)) {
    throw ConfigError("train_bpe: target size must exceed " + std::to_string(kFirstMergeId));
  }
  std::map<std::string, int64_t> chunk_counts;
  for (const std::string& line : corpus) {
    for (std::string_view chunk : split_chunks(line)) ++chunk_counts[std::string(chunk)];
  }
  std::vector<std::vector<int32_t>> words;
  std::vector<int64_t> counts;
  for (const auto& [chunk, n] : chunk_counts) {
    words.push_back(bytes_of(chunk));
    counts.push_back(n);
  }

  std::vector<Merge> merges;
  std::unordered_map<uint64_t, int64_t> pairs;
  while (static_cast<size_t>(kFirstMergeId) + merges.size() < target_size) {
    pairs.clear();
    for (size_t w = 0; w < words.size(); ++w) {
      const auto& ids = words[w];
      for (size_t i = 0; i + 1 < ids.size(); ++i) pairs[pair_key(ids[i], ids[i + 1])] += counts[w];
    }
    if (pairs.empty()) break;
    uint64_t best_key = 0;
    int64_t best_count = -1;
    for (const auto& [key, n] : pairs) {
      if (n > best_count || (n == best_count && key < best_key)) {
        best_key = key;
        best_count = n;
      }
    }
    const Merge m{static_cast<int32_t>(best_key >> 32), static_cast<int32_t>(best_key & 0xffffffffu)};
    const auto merged = static_cast<int32_t>(kFirstMergeId + merges.size());
    for (auto& ids : words) apply_merge(ids, m.left, m.right, merged);
    merges.push_back(m);
  }
  return Vocabulary(std::move(merges));
}

std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("corpus: cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace xmodal::text
