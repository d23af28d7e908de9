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

#ifndef XMODAL_TEXT_VOCABULARY_HPP_
#define XMODAL_TEXT_VOCABULARY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xmodal::text {

inline constexpr int32_t kPad = 0;
inline constexpr int32_t kCls = 1;
inline constexpr int32_t kSep = 2;
inline constexpr int32_t kImg = 3;
inline constexpr int32_t kMask = 4;
inline constexpr int32_t kReservedCount = 5;
inline constexpr int32_t kByteBase = kReservedCount;
inline constexpr int32_t kFirstMergeId = kByteBase + 256;

inline bool is_reserved(int32_t id) { return id >= 0 && id < kReservedCount; }

struct Merge {
  int32_t left = 0;
  int32_t right = 0;
  friend bool operator==(const Merge&, const Merge&) = default;
};

// Splits text into pre-tokenization chunks: an optional run of leading
// whitespace followed by a run of non-whitespace bytes. A trailing whitespace
// run forms its own chunk. Concatenating the chunks gives back the input.
std::vector<std::string_view> split_chunks(std::string_view text);

// Byte-level BPE vocabulary. Ids 0..4 are reserved markers, 5..260 the 256
// bytes, and every further id is the result of one merge, in merge order.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<Merge> merges);

  size_t size() const { return tokens_.size(); }
  const std::vector<Merge>& merges() const { return merges_; }
  // Byte string spelled by an id; reserved ids spell their marker name.
  const std::string& token(int32_t id) const;

  std::vector<int32_t> encode_chunk(std::string_view chunk) const;
  // Ids for raw text without [CLS]/[SEP].
  std::vector<int32_t> encode(std::string_view text) const;
  // Reserved ids are skipped.
  std::string decode(std::span<const int32_t> ids) const;

  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.merges_ == b.merges_; }

 private:
  std::vector<Merge> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<uint64_t, int32_t> merge_ids_;
};

// Learns merges greedily by pair frequency over whitespace chunks until the
// vocabulary reaches target_size or no adjacent pair remains. Ties go to the
// smallest (left, right) id pair. Throws InputError for an empty corpus and
// ConfigError when target_size does not exceed the byte alphabet.
Vocabulary train_bpe(std::span<const std::string> corpus, size_t target_size);

// One document per line; trailing '\r' removed, blank lines kept out.
std::vector<std::string> read_corpus(const std::filesystem::path& path);

}  // namespace xmodal::text

#endif  // XMODAL_TEXT_VOCABULARY_HPP_
