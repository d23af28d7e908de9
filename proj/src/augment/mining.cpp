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

#include "xmodal/augment/mining.hpp"

#include <algorithm>

#include "spdlog/spdlog.h"
#include "xmodal/errors.hpp"

namespace xmodal::augment {

CaptionPool CaptionPool::build(std::vector<std::string> captions, std::vector<uint32_t> image_ids) {
  if (captions.size() != image_ids.size()) throw ContractError("caption pool: one image id per caption");
  CaptionPool pool;
  std::vector<std::vector<std::string>> docs;
  for (const auto& c : captions) docs.push_back(retrieval::analyze(c));
  pool.index = retrieval::InvertedIndex::build(docs);
  pool.captions = std::move(captions);
  pool.image_ids = std::move(image_ids);
  return pool;
}

std::vector<retrieval::ScoredId> mine_hard_negative_captions(const std::string& caption, uint32_t image_id,
                                                             const CaptionPool& pool, size_t k,
                                                             const std::vector<std::string>& also_exclude) {
  const auto q = pool.index.vectorize(retrieval::analyze(caption));
  std::vector<retrieval::ScoredId> scored;
  for (uint32_t d = 0; d < pool.captions.size(); ++d) {
    if (pool.image_ids[d] == image_id || pool.captions[d] == caption) continue;
    if (std::find(also_exclude.begin(), also_exclude.end(), pool.captions[d]) != also_exclude.end()) continue;
    scored.push_back({d, retrieval::dot(q, pool.index.doc_vector(d))});
  }
  retrieval::sort_ranked(scored);
  if (scored.size() < k) {
    spdlog::debug("mine_hard_negative_captions: pool offers {} of {} captions", scored.size(), k);
  } else {
    scored.resize(k);
  }
  return scored;
}

}  // namespace xmodal::augment
