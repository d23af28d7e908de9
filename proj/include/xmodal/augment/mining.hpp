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

#ifndef XMODAL_AUGMENT_MINING_HPP_
#define XMODAL_AUGMENT_MINING_HPP_

#include <string>
#include <vector>

#include "xmodal/retrieval/index.hpp"
#include "xmodal/retrieval/search.hpp"

namespace xmodal::augment {

// Captions of the pair corpus with the image each belongs to.
struct CaptionPool {
  std::vector<std::string> captions;
  std::vector<uint32_t> image_ids;
  retrieval::InvertedIndex index;

  static CaptionPool build(std::vector<std::string> captions, std::vector<uint32_t> image_ids);
};

// Top-k pool captions by TF-IDF cosine over a full scan, skipping captions of
// image_id and captions string-equal to the query or to any entry of
// also_exclude. Ties go to the lower caption id.
std::vector<retrieval::ScoredId> mine_hard_negative_captions(const std::string& caption, uint32_t image_id,
                                                             const CaptionPool& pool, size_t k,
                                                             const std::vector<std::string>& also_exclude = {});

}  // namespace xmodal::augment

#endif  // XMODAL_AUGMENT_MINING_HPP_
