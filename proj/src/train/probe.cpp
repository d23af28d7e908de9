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

#include <algorithm>
#include <cmath>

#include "xmodal/train/trainer.hpp"

namespace xmodal::train {

RetrievalProbe recall_at_k(std::vector<std::vector<double>> scores, std::vector<size_t> ks) {
  const size_t n = scores.size();
  if (n < 2) throw ContractError("probe_retrieval: need at least 2 pairs");
  for (const auto& row : scores) {
    if (row.size() != n) throw ShapeError("probe_retrieval: score matrix must be square");
  }
  RetrievalProbe out;
  out.ks = std::move(ks);
  // rank[i] = candidates ahead of the true match; ties put the lower index first.
  std::vector<size_t> i2t(n, 0), t2i(n, 0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (scores[i][j] > scores[i][i] || (scores[i][j] == scores[i][i] && j < i)) ++i2t[i];
      if (scores[j][i] > scores[i][i] || (scores[j][i] == scores[i][i] && j < i)) ++t2i[i];
    }
  }
  for (size_t k : out.ks) {
    size_t hit_i2t = 0, hit_t2i = 0;
    for (size_t i = 0; i < n; ++i) {
      hit_i2t += i2t[i] < k ? 1 : 0;
      hit_t2i += t2i[i] < k ? 1 : 0;
    }
    out.image_to_text.push_back(static_cast<double>(hit_i2t) / static_cast<double>(n));
    out.text_to_image.push_back(static_cast<double>(hit_t2i) / static_cast<double>(n));
  }
  out.scores = std::move(scores);
  return out;
}

namespace {

constexpr size_t kProbeChunk = 64;

// Unit-normalized representation rows, one per pack.
template <typename T>
std::vector<std::vector<double>> encode_normalized(model::Model<T>& model, const std::vector<model::InputPack>& packs,
                                                   bool image_side) {
  std::vector<std::vector<double>> out;
  for (size_t start = 0; start < packs.size(); start += kProbeChunk) {
    std::vector<const model::InputPack*> ptrs;
    for (size_t i = start; i < std::min(packs.size(), start + kProbeChunk); ++i) ptrs.push_back(&packs[i]);
    const auto enc = model.forward(ptrs);
    for (size_t i = 0; i < ptrs.size(); ++i) {
      const auto row = enc.hidden.value().row(image_side ? enc.img_row(i) : enc.cls_row(i));
      std::vector<double> v(row.begin(), row.end());
      double norm = 0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (!(norm > 0)) throw NumericError("probe_retrieval: zero representation");
      for (double& x : v) x /= norm;
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace

template <typename T>
RetrievalProbe probe_retrieval(model::Model<T>& model, std::span<const ProbePair> pairs, std::vector<size_t> ks) {
  if (pairs.size() < 2) throw ContractError("probe_retrieval: need at least 2 pairs");
  std::vector<model::InputPack> images, texts;
  for (const auto& p : pairs) {
    images.push_back(model::assemble_single_image(*p.image, model.config()));
    texts.push_back(model::assemble_single_text(p.caption, model.config()));
  }
  const auto v = encode_normalized(model, images, true);
  const auto w = encode_normalized(model, texts, false);
  std::vector<std::vector<double>> scores(pairs.size(), std::vector<double>(pairs.size()));
  for (size_t i = 0; i < pairs.size(); ++i) {
    for (size_t j = 0; j < pairs.size(); ++j) {
      double d = 0;
      for (size_t c = 0; c < v[i].size(); ++c) d += v[i][c] * w[j][c];
      scores[i][j] = d;
    }
  }
  return recall_at_k(std::move(scores), std::move(ks));
}

template <typename T>
GenerationProbe probe_generation(model::Model<T>& model, std::span<const vision::RegionSet* const> images,
                                 std::span<const text::TokenSequence> captions, uint64_t seed,
                                 const text::Seq2SeqConfig& config) {
  if (images.size() != captions.size()) throw ShapeError("probe_generation: one image per caption");
  GenerationProbe out;
  for (size_t i = 0; i < captions.size(); ++i) {
    numerics::RngState rng = numerics::RngState(seed).fork(i);
    const auto split = text::sample_seq2seq_split(captions[i], rng, config);
    if (!split || split->target.size() < 2) continue;
    const auto source = model::assemble_pair(*images[i], split->source, model.config());
    GenerationSample s;
    s.source = split->source;
    s.target = split->target;
    s.generated = model::generate_greedy(model, source, split->target.size() - 1, {.stop_at_sep = false});
    for (size_t j = 0; j + 1 < s.target.size(); ++j) {
      if (j < s.generated.size() && s.generated[j] == s.target[j + 1]) ++s.matched;
    }
    out.matched += s.matched;
    out.total += s.target.size() - 1;
    out.samples.push_back(std::move(s));
  }
  return out;
}

template RetrievalProbe probe_retrieval<float>(model::Model<float>&, std::span<const ProbePair>, std::vector<size_t>);
template RetrievalProbe probe_retrieval<double>(model::Model<double>&, std::span<const ProbePair>,
                                                std::vector<size_t>);
template GenerationProbe probe_generation<float>(model::Model<float>&, std::span<const vision::RegionSet* const>,
                                                 std::span<const text::TokenSequence>, uint64_t,
                                                 const text::Seq2SeqConfig&);
template GenerationProbe probe_generation<double>(model::Model<double>&, std::span<const vision::RegionSet* const>,
                                                  std::span<const text::TokenSequence>, uint64_t,
                                                  const text::Seq2SeqConfig&);

}  // namespace xmodal::train
