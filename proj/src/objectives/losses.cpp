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

#include "xmodal/objectives/losses.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/errors.hpp"

namespace xmodal::objectives {

using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

SimilarityScore similarity(std::span<const double> a, std::span<const double> b, Provenance provenance) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("similarity: representation sizes differ");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw NumericError("similarity: zero vector");
  return {dot / (std::sqrt(na) * std::sqrt(nb)), provenance};
}

template <typename T>
Var<T> similarity_rows(const Var<T>& image_rows, const Var<T>& text_rows) {
  return numerics::dot_rows(numerics::normalize_rows(image_rows), numerics::normalize_rows(text_rows));
}

namespace {

void check_scores(bool any_positive, double tau) {
  if (!(tau > 0)) throw ContractError("cmcl_loss: temperature must be positive");
  if (!any_positive) throw ContractError("cmcl_loss: no positive scores");
}

double log_sum_exp(const std::vector<const std::vector<double>*>& families, double tau) {
  double mx = -INFINITY;
  for (const auto* f : families) {
    for (double s : *f) mx = std::max(mx, s / tau);
  }
  double z = 0;
  for (const auto* f : families) {
    for (double s : *f) z += std::exp(s / tau - mx);
  }
  return mx + std::log(z);
}

template <typename T>
Var<T> lse_of(const std::vector<Var<T>>& parts, double tau) {
  return numerics::logsumexp(numerics::scale(numerics::concat<T>(parts), static_cast<T>(1.0 / tau)));
}

std::vector<double> to_doubles(const auto& v) {
  if (!v.valid()) return {};
  const auto vals = v.value().values();
  return std::vector<double>(vals.begin(), vals.end());
}

}  // namespace

double cmcl_loss(const CmclBatchScores& s) {
  check_scores(!(s.pos_p.empty() && s.pos_i.empty() && s.pos_t.empty()), s.tau);
  const double pos = log_sum_exp({&s.pos_p, &s.pos_i, &s.pos_t}, s.tau);
  const double all = log_sum_exp({&s.pos_p, &s.pos_i, &s.pos_t, &s.neg_p, &s.neg_i, &s.neg_t}, s.tau);
  return all - pos;
}

template <typename T>
CmclBatchScores CmclScoreVars<T>::values() const {
  return {to_doubles(pos_p), to_doubles(pos_i), to_doubles(pos_t),
          to_doubles(neg_p), to_doubles(neg_i), to_doubles(neg_t), tau};
}

template <typename T>
Var<T> cmcl_loss(const CmclScoreVars<T>& s) {
  std::vector<Var<T>> pos, all;
  for (const auto* v : {&s.pos_p, &s.pos_i, &s.pos_t}) {
    if (v->valid() && v->size() > 0) pos.push_back(*v);
  }
  check_scores(!pos.empty(), s.tau);
  all = pos;
  for (const auto* v : {&s.neg_p, &s.neg_i, &s.neg_t}) {
    if (v->valid() && v->size() > 0) all.push_back(*v);
  }
  if (all.size() == pos.size()) {
    // No negatives: the two sums coincide.
    return numerics::scale(numerics::sum(pos[0]), T(0));
  }
  return numerics::sub(lse_of(all, s.tau), lse_of(pos, s.tau));
}

template <typename T>
std::vector<CmclScoreVars<T>> score_cmcl_group(model::Model<T>& model, std::span<const CmclExample> batch,
                                                const CmclConfig& config, numerics::RngState* dropout_rng) {
  const auto& mc = model.config();
  std::vector<model::InputPack> packs;
  auto add = [&](model::InputPack p) {
    packs.push_back(std::move(p));
    return packs.size() - 1;
  };
  // Pack indices of everything each group needs.
  struct Slots {
    size_t image = 0, text = 0;
    std::vector<size_t> positives, negatives, images, texts;
  };
  std::vector<Slots> slots(batch.size());
  for (size_t g = 0; g < batch.size(); ++g) {
    const CmclExample& ex = batch[g];
    if (ex.image == nullptr) throw ContractError("score_cmcl_group: group without an image");
    Slots& s = slots[g];
    s.image = add(model::assemble_single_image(*ex.image, mc));
    s.text = add(model::assemble_single_text(ex.text, mc));
    for (const auto& w : ex.positives) {
      s.positives.push_back(add(config.fully_individual ? model::assemble_single_text(w, mc)
                                                        : model::assemble_pair(*ex.image, w, mc)));
    }
    for (const auto& w : ex.negatives) {
      s.negatives.push_back(add(config.fully_individual ? model::assemble_single_text(w, mc)
                                                        : model::assemble_pair(*ex.image, w, mc)));
    }
    for (const auto* v : ex.images) s.images.push_back(add(model::assemble_single_image(*v, mc)));
    for (const auto& w : ex.texts) s.texts.push_back(add(model::assemble_single_text(w, mc)));
  }
  std::vector<const model::InputPack*> ptrs;
  for (const auto& p : packs) ptrs.push_back(&p);
  const auto enc = model.forward(ptrs, dropout_rng);

  // All cosines in one call; families are row ranges of the result.
  std::vector<size_t> img_rows, txt_rows;
  auto score = [&](size_t image_pack, size_t text_pack) {
    img_rows.push_back(enc.img_row(image_pack));
    txt_rows.push_back(enc.cls_row(text_pack));
    return img_rows.size() - 1;
  };
  struct Families {
    std::vector<size_t> pos_p, pos_i, pos_t, neg_p, neg_i, neg_t;
  };
  std::vector<Families> fam(batch.size());
  for (size_t g = 0; g < batch.size(); ++g) {
    const Slots& s = slots[g];
    Families& f = fam[g];
    f.pos_p.push_back(score(s.image, s.text));
    for (size_t p : s.positives) f.pos_p.push_back(config.fully_individual ? score(s.image, p) : score(p, p));
    for (size_t p : s.negatives) f.neg_p.push_back(config.fully_individual ? score(s.image, p) : score(p, p));
    for (size_t p : s.images) f.pos_i.push_back(score(p, s.text));
    for (size_t p : s.texts) f.pos_t.push_back(score(s.image, p));
    for (size_t h = 0; h < batch.size(); ++h) {
      if (h == g) continue;
      f.neg_i.push_back(score(slots[h].image, s.text));
      f.neg_t.push_back(score(s.image, slots[h].text));
    }
    if (!config.share_batch_negatives) continue;
    for (size_t h = 0; h < batch.size(); ++h) {
      if (h == g) continue;
      for (size_t p : slots[h].images) f.neg_i.push_back(score(p, s.text));
      for (size_t p : slots[h].texts) f.neg_t.push_back(score(s.image, p));
      if (!config.fully_individual) continue;
      for (size_t p : slots[h].positives) f.neg_t.push_back(score(s.image, p));
    }
  }
  const auto cos = numerics::reshape(similarity_rows(enc.rows(img_rows), enc.rows(txt_rows)),
                                     Shape{img_rows.size(), 1});
  auto pick = [&](const std::vector<size_t>& idx) {
    return idx.empty() ? Var<T>() : numerics::reshape(numerics::select_rows(cos, idx), Shape{idx.size()});
  };
  std::vector<CmclScoreVars<T>> out(batch.size());
  const Provenance pair_prov = config.fully_individual ? Provenance::kIndividual : Provenance::kJoint;
  for (size_t g = 0; g < batch.size(); ++g) {
    const Families& f = fam[g];
    CmclScoreVars<T>& o = out[g];
    o.tau = config.tau;
    o.pos_p = pick(f.pos_p);
    o.pos_i = pick(f.pos_i);
    o.pos_t = pick(f.pos_t);
    o.neg_p = pick(f.neg_p);
    o.neg_i = pick(f.neg_i);
    o.neg_t = pick(f.neg_t);
    o.pos_p_provenance.push_back(Provenance::kIndividual);
    o.pos_p_provenance.resize(f.pos_p.size(), pair_prov);
    o.neg_p_provenance.assign(f.neg_p.size(), pair_prov);
  }
  return out;
}

template <typename T>
Var<T> visual_loss_rows(model::Model<T>& model, const Var<T>& hidden_rows,
                        const std::vector<std::vector<double>>& target_features,
                        const std::vector<std::vector<double>>& target_dist, Reduction reduction) {
  const size_t n = target_features.size();
  if (target_dist.size() != n || hidden_rows.value().rows() != n) {
    throw ShapeError("visual_loss: one hidden row, feature and distribution per region");
  }
  if (n == 0) return Var<T>::constant(Tensor<T>::scalar(T(0)));
  const size_t dv = model.config().feature_dim, k = model.config().num_classes;
  Tensor<T> feat(Shape{n, dv}), dist(Shape{n, k});
  for (size_t r = 0; r < n; ++r) {
    if (target_features[r].size() != dv || target_dist[r].size() != k) {
      throw ShapeError("visual_loss: target width does not match the config");
    }
    for (size_t c = 0; c < dv; ++c) feat.at(r, c) = static_cast<T>(target_features[r][c]);
    for (size_t c = 0; c < k; ++c) dist.at(r, c) = static_cast<T>(target_dist[r][c]);
  }
  const auto diff = numerics::sub(model.region_regression(hidden_rows), Var<T>::constant(std::move(feat)));
  const auto regression = numerics::row_sums(numerics::mul(diff, diff));
  const auto classification = numerics::soft_cross_entropy_rows(model.region_class_logits(hidden_rows), dist);
  const auto per_region = numerics::add(regression, classification);
  return reduction == Reduction::kSum ? numerics::sum(per_region) : numerics::mean(per_region);
}

template <typename T>
Var<T> visual_loss(model::Model<T>& model, const model::EncodedOutput<T>& encoded, size_t pack,
                   const vision::RegionMaskPlan& plan, Reduction reduction) {
  const model::InputPack& p = *encoded.layout.packs.at(pack);
  std::vector<size_t> rows;
  for (size_t r : plan.masked) {
    if (r >= p.region_count) throw ContractError("visual_loss: masked region outside the pack");
    rows.push_back(encoded.layout.row(pack, p.region_slot(r)));
  }
  return visual_loss_rows(model, encoded.rows(rows), plan.target_features, plan.target_dist, reduction);
}

template <typename T>
Var<T> token_nll_rows(model::Model<T>& model, const Var<T>& hidden_rows, std::span<const int32_t> targets) {
  if (targets.empty()) throw ContractError("token_nll_rows: no targets");
  const auto logp = numerics::log_softmax_rows(model.lm_logits(hidden_rows));
  return numerics::scale(numerics::mean(numerics::pick(logp, targets)), T(-1));
}

TokenTargets bidirectional_targets(const model::InputPack& pack, const text::MaskingPlan& plan) {
  TokenTargets t;
  for (size_t i = 0; i < plan.positions.size(); ++i) {
    if (plan.positions[i] >= pack.text_length) throw ContractError("bidirectional_targets: position outside the text");
    t.slots.push_back(pack.token_slot(plan.positions[i]));
    t.targets.push_back(plan.targets[i]);
  }
  return t;
}

TokenTargets seq2seq_targets(const model::InputPack& pack, const text::Seq2SeqSplit& split) {
  if (pack.mode != model::AttentionMode::kSeq2Seq || pack.source_len != split.source.size() ||
      pack.text_length != split.source.size() + split.target.size()) {
    throw ContractError("seq2seq_targets: pack does not hold this split in seq2seq mode");
  }
  TokenTargets t;
  for (size_t j = 0; j + 1 < split.target.size(); ++j) {
    t.slots.push_back(pack.token_slot(pack.source_len + j));
    t.targets.push_back(split.target[j + 1]);
  }
  return t;
}

namespace {

template <typename T>
std::optional<Var<T>> nll_at(model::Model<T>& model, const model::EncodedOutput<T>& encoded, size_t pack,
                             const TokenTargets& t) {
  if (t.targets.empty()) return std::nullopt;
  std::vector<size_t> rows;
  for (size_t s : t.slots) rows.push_back(encoded.layout.row(pack, s));
  return token_nll_rows(model, encoded.rows(rows), t.targets);
}

}  // namespace

template <typename T>
std::optional<Var<T>> bidirectional_loss(model::Model<T>& model, const model::EncodedOutput<T>& encoded,
                                         size_t pack, const text::MaskingPlan& plan) {
  return nll_at(model, encoded, pack, bidirectional_targets(*encoded.layout.packs.at(pack), plan));
}

template <typename T>
std::optional<Var<T>> seq2seq_loss(model::Model<T>& model, const model::EncodedOutput<T>& encoded, size_t pack,
                                   const text::Seq2SeqSplit& split) {
  return nll_at(model, encoded, pack, seq2seq_targets(*encoded.layout.packs.at(pack), split));
}

#define XMODAL_INSTANTIATE_OBJECTIVES(T)                                                                     \
  template Var<T> similarity_rows<T>(const Var<T>&, const Var<T>&);                                          \
  template struct CmclScoreVars<T>;                                                                          \
  template Var<T> cmcl_loss<T>(const CmclScoreVars<T>&);                                                     \
  template std::vector<CmclScoreVars<T>> score_cmcl_group<T>(model::Model<T>&, std::span<const CmclExample>, \
                                                             const CmclConfig&, numerics::RngState*);        \
  template Var<T> visual_loss_rows<T>(model::Model<T>&, const Var<T>&, const std::vector<std::vector<double>>&, \
                                      const std::vector<std::vector<double>>&, Reduction);                   \
  template Var<T> visual_loss<T>(model::Model<T>&, const model::EncodedOutput<T>&, size_t,                   \
                                 const vision::RegionMaskPlan&, Reduction);                                  \
  template Var<T> token_nll_rows<T>(model::Model<T>&, const Var<T>&, std::span<const int32_t>);              \
  template std::optional<Var<T>> bidirectional_loss<T>(model::Model<T>&, const model::EncodedOutput<T>&,     \
                                                       size_t, const text::MaskingPlan&);                    \
  template std::optional<Var<T>> seq2seq_loss<T>(model::Model<T>&, const model::EncodedOutput<T>&, size_t,   \
                                                 const text::Seq2SeqSplit&);

XMODAL_INSTANTIATE_OBJECTIVES(float)
XMODAL_INSTANTIATE_OBJECTIVES(double)

}  // namespace xmodal::objectives
