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

#ifndef XMODAL_OBJECTIVES_LOSSES_HPP_
#define XMODAL_OBJECTIVES_LOSSES_HPP_

#include <optional>
#include <span>
#include <vector>

#include "xmodal/model/transformer.hpp"
#include "xmodal/numerics/autodiff.hpp"
#include "xmodal/text/masking.hpp"
#include "xmodal/vision/regions.hpp"

namespace xmodal::objectives {

enum class Provenance { kJoint, kIndividual };

struct SimilarityScore {
  double value = 0.0;
  Provenance provenance = Provenance::kIndividual;
};

// Cosine of two representation vectors. Throws ShapeError on a length
// mismatch and NumericError on a zero vector.
SimilarityScore similarity(std::span<const double> image_repr, std::span<const double> text_repr,
                           Provenance provenance = Provenance::kIndividual);

// Row-wise cosine of [n, h] inputs; [n].
template <typename T>
numerics::Var<T> similarity_rows(const numerics::Var<T>& image_rows, const numerics::Var<T>& text_rows);

// Plain score lists of one group.
struct CmclBatchScores {
  std::vector<double> pos_p, pos_i, pos_t;
  std::vector<double> neg_p, neg_i, neg_t;
  double tau = 0.1;
};

// -log( sum_pos exp(s/tau) / (sum_neg exp(s/tau) + sum_pos exp(s/tau)) ).
// Throws ContractError without positives or with tau <= 0.
double cmcl_loss(const CmclBatchScores& scores);

// Same scores on the tape; each family is a rank-1 Var, or invalid when
// empty.
template <typename T>
struct CmclScoreVars {
  numerics::Var<T> pos_p, pos_i, pos_t;
  numerics::Var<T> neg_p, neg_i, neg_t;
  double tau = 0.1;
  // Parallel to pos_p / neg_p.
  std::vector<Provenance> pos_p_provenance;
  std::vector<Provenance> neg_p_provenance;

  CmclBatchScores values() const;
};

template <typename T>
numerics::Var<T> cmcl_loss(const CmclScoreVars<T>& scores);

struct CmclConfig {
  double tau = 0.1;
  // Score rewritten pairs from separately encoded image and text instead of
  // one joint encoding.
  bool fully_individual = false;
  // Also score each group against the other groups' individually encoded
  // retrieved images/texts (and positives, when fully individual) as in-batch
  // negatives, so no text or image is only ever a positive.
  bool share_batch_negatives = false;
};

// Tokenized material of one group. Token sequences are [CLS] ... [SEP].
struct CmclExample {
  const vision::RegionSet* image = nullptr;
  std::vector<int32_t> text;
  std::vector<std::vector<int32_t>> positives;
  std::vector<std::vector<int32_t>> negatives;
  std::vector<const vision::RegionSet*> images;
  std::vector<std::vector<int32_t>> texts;
};

// Scores every group of a batch with one batched forward pass.
//   pos_p: anchor (individual), then (V, W+) per positive (joint by default)
//   neg_p: (V, W-) per hard negative (joint by default)
//   pos_i: retrieved images against the individually encoded W
//   pos_t: retrieved texts against the individually encoded V
//   neg_i / neg_t: the other groups' V / W against W / V; with
//     share_batch_negatives, then their retrieved images / texts and (fully
//     individual) positives
template <typename T>
std::vector<CmclScoreVars<T>> score_cmcl_group(model::Model<T>& model, std::span<const CmclExample> batch,
                                                const CmclConfig& config, numerics::RngState* dropout_rng = nullptr);

enum class Reduction { kMean, kSum };

// Feature regression plus soft-label region classification over the given
// rows: per region ||r(h) - v||^2 + CE(c(v), softmax(s(h))), reduced over
// regions. Zero for no rows.
template <typename T>
numerics::Var<T> visual_loss_rows(model::Model<T>& model, const numerics::Var<T>& hidden_rows,
                                  const std::vector<std::vector<double>>& target_features,
                                  const std::vector<std::vector<double>>& target_dist,
                                  Reduction reduction = Reduction::kMean);

// Visual loss of one encoded pack at the plan's masked regions.
template <typename T>
numerics::Var<T> visual_loss(model::Model<T>& model, const model::EncodedOutput<T>& encoded, size_t pack,
                             const vision::RegionMaskPlan& plan, Reduction reduction = Reduction::kMean);

// Mean negative log-likelihood of `targets` under softmax(lm_head(rows)).
template <typename T>
numerics::Var<T> token_nll_rows(model::Model<T>& model, const numerics::Var<T>& hidden_rows,
                                std::span<const int32_t> targets);

// Rows and targets a masking plan asks the LM head to predict.
struct TokenTargets {
  std::vector<size_t> slots;
  std::vector<int32_t> targets;
};

TokenTargets bidirectional_targets(const model::InputPack& pack, const text::MaskingPlan& plan);
// Teacher forcing: the slot of target token j predicts token j + 1.
TokenTargets seq2seq_targets(const model::InputPack& pack, const text::Seq2SeqSplit& split);

// nullopt for an empty plan.
template <typename T>
std::optional<numerics::Var<T>> bidirectional_loss(model::Model<T>& model, const model::EncodedOutput<T>& encoded,
                                                   size_t pack, const text::MaskingPlan& plan);
// nullopt when the target has nothing to predict after its leading [CLS].
template <typename T>
std::optional<numerics::Var<T>> seq2seq_loss(model::Model<T>& model, const model::EncodedOutput<T>& encoded,
                                             size_t pack, const text::Seq2SeqSplit& split);

}  // namespace xmodal::objectives

#endif  // XMODAL_OBJECTIVES_LOSSES_HPP_
