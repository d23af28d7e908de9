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

// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by number; no arguments runs all ten.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/corpora.hpp"
#include "support/gradcheck.hpp"
#include "support/retrieval_oracle.hpp"
#include "support/toy.hpp"
#include "support/world.hpp"
#include "xmodal/objectives/losses.hpp"
#include "xmodal/retrieval/index.hpp"
#include "xmodal/retrieval/search.hpp"
#include "xmodal/text/masking.hpp"
#include "xmodal/text/tokenizer.hpp"
#include "xmodal/train/trainer.hpp"
#include "xmodal/vision/regions.hpp"
#include "xmodal/vision/scene.hpp"

using namespace xmodal;
using numerics::RngState;
using numerics::Tensor;
using numerics::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("xmodal_acceptance_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Desk-size model fitted to a world, without dropout.
model::ModelConfig desk_model(const testing::World& w, bool dropout) {
  auto mc = w.fit(model::ModelConfig::desk());
  if (!dropout) {
    mc.hidden_dropout = 0.0;
    mc.attention_dropout = 0.0;
  }
  return mc;
}

// 1. Every parameter gradient of the combined loss against central finite
// differences. Each tensor is checked along a random unit direction covering
// all its entries, and entry-wise at sampled coordinates.
Outcome gradient_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::World w({.pairs = 8, .images = 8, .texts = 8, .seed = 3}, {.vocab_size = 300, .max_text_len = 32},
                   augment::AugmentConfig::desk_scale(), 4);
  auto mc = desk_model(w, false);
  train::TrainConfig tc;
  tc.ratio = {0, 0, 1};
  tc.batch_size = 4;
  const train::BatchPlan plan{1, {{train::Modality::kPair, 0}, {train::Modality::kPair, 1},
                                  {train::Modality::kPair, 2}, {train::Modality::kPair, 3}}};
  // First seed from 9 whose batch has masked regions, predicted tokens, and CMCL groups.
  std::optional<train::Trainer<double>> holder;
  std::optional<train::PreparedBatch> prepared;
  for (tc.seed = 9; tc.seed < 100; ++tc.seed) {
    holder.emplace(*w.train_data, mc, tc);
    prepared = holder->prepare(plan);
    const auto probe = holder->compute_losses(*prepared, nullptr);
    if (probe.visual && probe.language && probe.cmcl) break;
  }
  if (tc.seed == 100) return {false, "no seed in [9, 100) yields all three loss components"};
  auto& trainer = *holder;
  const auto& batch = *prepared;
  if (batch.groups.size() != 4) return {false, "expected 4 CMCL groups"};
  auto& params = trainer.model().params();
  auto loss_value = [&] { return trainer.compute_losses(batch, nullptr).total(); };

  params.zero_grad();
  const auto parts = trainer.compute_losses(batch, nullptr);
  numerics::backward(*parts.total_var());

  constexpr double kStep = 1e-3;
  constexpr double kFloor = 1e-6;
  // Central differences at steps h and h/2 combined by Richardson extrapolation
  // (truncation error O(h^4)). `shift(t)` moves the parameters by t along the probe.
  auto richardson = [&](const auto& shift) {
    auto central = [&](double h) {
      shift(h);
      const double up = loss_value();
      shift(-h);
      const double down = loss_value();
      return (up - down) / (2 * h);
    };
    const double coarse = central(kStep);
    const double fine = central(kStep / 2);
    return (4 * fine - coarse) / 3;
  };
  RngState rng(21);
  double worst = 0.0;
  std::string worst_name;
  size_t checks = 0, scalars = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    scalars += p.value.size();
    const Tensor<double> grad = p.grad;
    // Random unit direction over the whole tensor.
    std::vector<double> dir(p.value.size());
    double norm = 0.0;
    for (double& v : dir) norm += (v = rng.normal()) * v;
    norm = std::sqrt(norm);
    double analytic = 0.0;
    for (size_t k = 0; k < dir.size(); ++k) analytic += (dir[k] /= norm) * grad[k];
    const Tensor<double> saved = p.value;
    double err = testing::relative_error(analytic, richardson([&](double t) {
                                           for (size_t k = 0; k < dir.size(); ++k) p.value[k] = saved[k] + t * dir[k];
                                         }),
                                         kFloor);
    p.value = saved;
    ++checks;
    // Sampled single entries, including the largest-gradient one.
    std::vector<size_t> entries{static_cast<size_t>(
        std::max_element(grad.values().begin(), grad.values().end(),
                         [](double a, double b) { return std::abs(a) < std::abs(b); }) -
        grad.values().begin())};
    for (int s = 0; s < 2; ++s) entries.push_back(rng.uniform_int(p.value.size()));
    for (size_t k : entries) {
      const double v = p.value[k];
      const double numeric = richardson([&](double t) { p.value[k] = v + t; });
      p.value[k] = v;
      err = std::max(err, testing::relative_error(grad[k], numeric, kFloor));
      ++checks;
    }
    if (err > worst) {
      worst = err;
      worst_name = p.name;
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-5 && elapsed < 120.0,
          fmt("seed %llu, %zu tensors (%zu scalars), %zu checks, max rel err %.2e at %s, %.1fs",
              static_cast<unsigned long long>(tc.seed), params.size(), scalars, checks, worst, worst_name.c_str(),
              elapsed)};
}

// 2. Closed-form CMCL values and the monotonicity property.
Outcome cmcl_points() {
  using objectives::CmclBatchScores;
  using objectives::cmcl_loss;
  const double no_neg = cmcl_loss(CmclBatchScores{.pos_p = {0.3, -0.2}, .pos_i = {0.9}, .pos_t = {0.1}});
  const double sym = cmcl_loss(CmclBatchScores{.pos_p = {0.4}, .neg_p = {0.4}});
  RngState rng(2);
  auto scores = [&](size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  size_t violations = 0;
  for (int t = 0; t < 10000; ++t) {
    CmclBatchScores s{.pos_p = scores(1 + rng.uniform_int(4)),
                      .pos_i = scores(rng.uniform_int(5)),
                      .pos_t = scores(rng.uniform_int(5)),
                      .neg_p = scores(rng.uniform_int(9)),
                      .neg_i = scores(rng.uniform_int(8)),
                      .neg_t = scores(rng.uniform_int(8))};
    const double base = cmcl_loss(s);
    CmclBatchScores added = s;
    std::vector<double>* negs[] = {&added.neg_p, &added.neg_i, &added.neg_t};
    negs[rng.uniform_int(3)]->push_back(rng.uniform(-1.0, 1.0));
    if (!(cmcl_loss(added) > base)) ++violations;
    CmclBatchScores raised = s;
    std::vector<double*> pos;
    for (auto* fam : {&raised.pos_p, &raised.pos_i, &raised.pos_t}) {
      for (double& x : *fam) pos.push_back(&x);
    }
    *pos[rng.uniform_int(pos.size())] += rng.uniform(0.01, 0.5);
    const bool has_neg = !(s.neg_p.empty() && s.neg_i.empty() && s.neg_t.empty());
    if (has_neg && !(cmcl_loss(raised) < base)) ++violations;
    if (!has_neg && cmcl_loss(raised) != 0.0) ++violations;
  }
  const bool pass = no_neg == 0.0 && std::abs(sym - std::log(2.0)) < 1e-9 && violations == 0;
  return {pass, fmt("empty-negative loss %.17g, symmetric loss - ln 2 = %.2e, %zu monotonicity violations / 10000",
                    no_neg, sym - std::log(2.0), violations)};
}

// 512-token sequence of one- to three-token words.
text::TokenSequence word_sequence_512(RngState& rng) {
  text::TokenSequence seq;
  seq.ids.push_back(text::kCls);
  while (seq.ids.size() < 511) {
    const size_t len = std::min<size_t>(1 + rng.uniform_int(3), 511 - seq.ids.size());
    seq.words.push_back({seq.ids.size(), seq.ids.size() + len});
    for (size_t t = 0; t < len; ++t) seq.ids.push_back(static_cast<int32_t>(text::kReservedCount + rng.uniform_int(900)));
  }
  seq.ids.push_back(text::kSep);
  return seq;
}

// 3. Masking budgets, action split and plan invariants.
Outcome masking_statistics() {
  RngState rng(3);
  constexpr size_t kVocab = 1000;
  double fraction_sum = 0.0;
  size_t actions[3] = {0, 0, 0};
  size_t invariant_failures = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto seq = word_sequence_512(rng);
    const auto plan = text::sample_bidirectional_mask(seq, kVocab, rng);
    fraction_sum += static_cast<double>(plan.positions.size()) / static_cast<double>(seq.interior());
    std::set<size_t> pos(plan.positions.begin(), plan.positions.end());
    if (pos.size() != plan.positions.size() || pos.count(0) || pos.count(seq.ids.size() - 1)) ++invariant_failures;
    for (const auto& w : seq.words) {
      const auto covered = std::count_if(pos.begin(), pos.end(), [&](size_t p) { return p >= w.start && p < w.end; });
      if (covered != 0 && covered != static_cast<long>(w.length())) ++invariant_failures;
    }
    for (auto a : plan.actions) ++actions[static_cast<int>(a)];
  }
  const double mean_fraction = fraction_sum / 10000.0;
  const double total = static_cast<double>(actions[0] + actions[1] + actions[2]);
  const double f_mask = actions[static_cast<int>(text::MaskAction::kMaskToken)] / total;
  const double f_random = actions[static_cast<int>(text::MaskAction::kRandomToken)] / total;
  const double f_keep = actions[static_cast<int>(text::MaskAction::kKeep)] / total;

  double selected_sum = 0.0;
  size_t split_failures = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto seq = word_sequence_512(rng);
    const auto split = text::sample_seq2seq_split(seq, rng);
    if (!split || split->reconstruct() != seq.ids) {
      ++split_failures;
      continue;
    }
    size_t selected = 0, prev_end = 1;
    for (const auto& f : split->fragments) {
      if (f.start < prev_end || f.end > seq.ids.size() - 1 || f.length() < 1 || f.length() > 32) ++split_failures;
      prev_end = f.end;
      selected += f.length();
    }
    selected_sum += static_cast<double>(selected) / static_cast<double>(seq.interior());
  }
  const double mean_selected = selected_sum / 10000.0;
  const bool pass = mean_fraction >= 0.15 && mean_fraction <= 0.17 && std::abs(f_mask - 0.8) <= 0.01 &&
                    std::abs(f_random - 0.1) <= 0.01 && std::abs(f_keep - 0.1) <= 0.01 && mean_selected >= 0.25 &&
                    mean_selected <= 0.31 && invariant_failures == 0 && split_failures == 0;
  return {pass, fmt("masked fraction %.4f, actions %.4f/%.4f/%.4f, seq2seq selected %.4f, %zu+%zu invariant failures",
                    mean_fraction, f_mask, f_random, f_keep, mean_selected, invariant_failures, split_failures)};
}

// 4. Overlap closure of region masks and zeroed slots in the model input.
Outcome region_closure() {
  const auto grammar = vision::GrammarConfig::desk_default();
  model::ModelConfig mc = model::ModelConfig::desk();
  mc.feature_dim = grammar.feature_dim;
  mc.num_classes = grammar.num_classes();
  RngState rng(4);
  size_t leaks = 0, nonzero = 0, masked_total = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto [scene, caption] = vision::generate_synthetic_scene(grammar, rng);
    const auto& r = scene.regions;
    const auto plan = vision::sample_region_mask(r, rng);
    for (size_t i = 0; i < r.size(); ++i) {
      if (plan.is_masked(i)) continue;
      for (size_t a : plan.anchors) leaks += vision::overlap_ratio(r.boxes[i], r.boxes[a]) > 0.3 ? 1 : 0;
    }
    const auto pack = model::assemble_single_image(plan.apply(r), mc);
    for (size_t m : plan.masked) {
      ++masked_total;
      for (size_t c = 0; c < pack.features.cols(); ++c) nonzero += pack.features.at(pack.region_slot(m), c) != 0.0;
    }
  }
  return {leaks == 0 && nonzero == 0 && masked_total > 0,
          fmt("%zu masked regions, %zu overlap leaks, %zu nonzero masked feature entries", masked_total, leaks,
              nonzero)};
}

// 5. Image and text top-20 against brute-force references, ties included.
Outcome retrieval_oracle() {
  using namespace retrieval;
  const auto corpus = testing::make_scenes(500, 77);
  std::vector<vision::RegionSet> images;
  std::vector<std::vector<std::string>> label_docs;
  for (const auto& s : corpus.scenes) {
    images.push_back(s.regions);
    label_docs.push_back(image_terms(s.regions));
  }
  const auto image_index = build_image_index(images);
  const auto image_oracle = testing::oracle_corpus(label_docs);
  size_t image_mismatch = 0, image_ties = 0;
  for (uint32_t q = 0; q < 500; ++q) {
    const auto got = retrieve_images(image_index.doc_vector(q), image_index, 20, q);
    const auto want = testing::oracle_top_k(image_oracle, image_oracle.vectors[q], 20, q);
    if (got.size() != want.size()) {
      ++image_mismatch;
      continue;
    }
    for (size_t i = 0; i < got.size(); ++i) {
      if (got[i].id != want[i].id || got[i].score != want[i].score) ++image_mismatch;
      if (i > 0 && want[i].score == want[i - 1].score) ++image_ties;
    }
  }

  const auto texts = testing::make_sentences(2000, 12);
  const auto vocab = text::train_bpe(texts, 600);
  const text::Tokenizer tok(vocab);
  std::vector<std::vector<int32_t>> tokens;
  std::vector<std::vector<std::string>> analyzed;
  for (const auto& t : texts) {
    tokens.push_back(tok.encode(t).ids);
    analyzed.push_back(analyze(t));
  }
  const auto text_index = InvertedIndex::build(analyzed);
  RngState rng(5);
  Tensor<double> table(numerics::Shape{vocab.size(), 16});
  for (double& v : table.values()) v = rng.normal();
  const MeanTokenEmbedder embedder(table);
  const TextRetrievalConfig config{.k_filter = 50, .k_rerank = 20};
  const auto oracle = testing::oracle_corpus(analyzed);
  auto mean_row = [&](const std::vector<int32_t>& ids) {
    std::vector<double> m(16, 0.0);
    size_t n = 0;
    for (int32_t id : ids) {
      if (id < text::kReservedCount) continue;
      for (size_t c = 0; c < 16; ++c) m[c] += table.at(static_cast<size_t>(id), c);
      ++n;
    }
    for (double& v : m) v /= static_cast<double>(n);
    return m;
  };
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
  };
  size_t text_mismatch = 0, text_queries = 0;
  for (uint32_t q = 0; q < texts.size(); ++q) {
    ++text_queries;
    std::vector<testing::Ranked> stage2;
    const auto qw = testing::oracle_weights(analyzed[q], oracle.df, texts.size());
    for (uint32_t d = 0; d < texts.size(); ++d) {
      if (d == q) continue;
      bool shares = false;
      for (const auto& t : analyzed[q]) {
        shares = shares || (!is_stopword(t) && std::count(oracle.docs[d].begin(), oracle.docs[d].end(), t) > 0);
      }
      if (shares) stage2.push_back({d, testing::oracle_cosine(qw, oracle.vectors[d])});
    }
    stage2 = testing::oracle_rank(stage2, config.k_filter);
    std::vector<testing::Ranked> stage3;
    const auto qe = mean_row(tokens[q]);
    for (const auto& r : stage2) stage3.push_back({r.id, cosine(qe, mean_row(tokens[r.id]))});
    stage3 = testing::oracle_rank(stage3, config.k_rerank);
    const auto got = retrieve_texts(texts[q], tokens[q], text_index, tokens, embedder, config, q);
    if (got.size() != stage3.size()) {
      ++text_mismatch;
      continue;
    }
    for (size_t i = 0; i < got.size(); ++i) {
      if (got[i].id != stage3[i].id || got[i].score != stage3[i].score) ++text_mismatch;
    }
  }
  return {image_mismatch == 0 && text_mismatch == 0 && image_ties > 0,
          fmt("500 image queries: %zu mismatches (%zu tied ranks); %zu text queries over 2000: %zu mismatches",
              image_mismatch, image_ties, text_queries, text_mismatch)};
}

template <typename T>
std::vector<std::vector<T>> real_rows(const model::EncodedOutput<T>& enc, const model::InputPack& p) {
  std::vector<std::vector<T>> out;
  for (size_t s = 0; s < p.total(); ++s) {
    if (!p.is_real(s)) continue;
    const auto row = enc.hidden.value().row(enc.layout.row(0, s));
    out.emplace_back(row.begin(), row.end());
  }
  return out;
}

// 6. Pseudo slots are invisible to real slots and receive no gradient.
Outcome pseudo_isolation() {
  const auto cfg = testing::toy_config();
  model::Model<double> m(cfg, 15);
  testing::amplify(m, 8.0);
  RngState rng(16);
  size_t changed = 0, leaked = 0, packs = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto regions = testing::toy_regions(1 + rng.uniform_int(cfg.max_regions), cfg.feature_dim, cfg.num_classes, rng);
    const auto ids = testing::toy_tokens(1 + rng.uniform_int(cfg.max_text_len - 2), cfg.vocab_size, rng);
    const int kind = trial % 3;
    const auto layout_mode = trial % 2 == 0 ? model::PackMode::kFull : model::PackMode::kCompact;
    model::InputPack p = kind == 0   ? model::assemble_pair(regions, ids, cfg, layout_mode)
                         : kind == 1 ? model::assemble_single_text(ids, cfg, layout_mode)
                                     : model::assemble_single_image(regions, cfg, layout_mode);
    model::InputPack q = p;
    bool any_pseudo = false;
    for (size_t s = 0; s < q.total(); ++s) {
      if (q.is_real(s)) continue;
      any_pseudo = true;
      if (s < q.region_slots) {
        for (size_t c = 0; c < cfg.feature_dim; ++c) q.features.at(s, c) = rng.normal() * 5;
        for (size_t c = 0; c < model::kGeometryDim; ++c) q.geometry.at(s, c) = rng.uniform();
      } else {
        q.token_ids[s - q.region_slots] = static_cast<int32_t>(rng.uniform_int(cfg.vocab_size));
      }
    }
    if (!any_pseudo) continue;
    ++packs;
    if (real_rows(m.forward(p), p) != real_rows(m.forward(q), q)) ++changed;

    const model::InputPack* one[] = {&p};
    const auto layout = model::make_layout(one);
    auto leaf = Var<double>::leaf(m.embed(layout).value());
    const auto enc = m.encode(leaf, layout);
    std::vector<size_t> rows;
    for (size_t s = 0; s < p.total(); ++s) {
      if (p.is_real(s)) rows.push_back(layout.row(0, s));
    }
    Tensor<double> w(numerics::Shape{rows.size(), cfg.hidden});
    for (double& v : w.values()) v = rng.normal();
    numerics::backward(numerics::sum(numerics::mul(enc.rows(rows), Var<double>::constant(w))));
    const auto g = leaf.grad();
    for (size_t s = 0; s < p.total(); ++s) {
      if (p.is_real(s)) continue;
      const auto row = g.row(layout.row(0, s));
      if (!std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) ++leaked;
    }
  }
  return {changed == 0 && leaked == 0 && packs > 0,
          fmt("%zu packs with pseudo slots: %zu changed real outputs, %zu pseudo rows with nonzero gradient", packs,
              changed, leaked)};
}

// 7. Seq2seq causality by autodiff and split reconstruction.
Outcome seq2seq_causality() {
  const auto cfg = testing::toy_config();
  model::Model<double> m(cfg, 19);
  testing::amplify(m, 4.0);
  RngState rng(20);
  size_t violations = 0, checked = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const auto regions = testing::toy_regions(1 + rng.uniform_int(3), cfg.feature_dim, cfg.num_classes, rng);
    auto p = model::assemble_pair(regions, testing::toy_tokens(6 + rng.uniform_int(4), cfg.vocab_size, rng), cfg);
    const size_t src = 2 + rng.uniform_int(3);
    model::build_attention_mode(p, model::AttentionMode::kSeq2Seq, src);
    const model::InputPack* one[] = {&p};
    const auto layout = model::make_layout(one);
    for (size_t j = src; j < p.text_length; ++j) {
      auto leaf = Var<double>::leaf(m.embed(layout).value());
      const auto enc = m.encode(leaf, layout);
      const size_t row = p.token_slot(j);
      Tensor<double> w(numerics::Shape{1, cfg.hidden});
      for (double& v : w.values()) v = rng.normal();
      numerics::backward(
          numerics::sum(numerics::mul(enc.rows(std::span<const size_t>(&row, 1)), Var<double>::constant(w))));
      const auto g = leaf.grad();
      for (size_t k = src; k < p.text_length; ++k) {
        const auto gr = g.row(p.token_slot(k));
        const bool zero = std::all_of(gr.begin(), gr.end(), [](double v) { return v == 0.0; });
        if (zero != (k > j)) ++violations;
        ++checked;
      }
    }
  }
  size_t failures = 0;
  for (int t = 0; t < 10000; ++t) {
    text::TokenSequence seq;
    seq.ids.push_back(text::kCls);
    const size_t n = 4 + rng.uniform_int(200);
    for (size_t i = 0; i < n; ++i) seq.ids.push_back(static_cast<int32_t>(text::kReservedCount + rng.uniform_int(500)));
    seq.ids.push_back(text::kSep);
    const auto split = text::sample_seq2seq_split(seq, rng);
    if (!split || split->reconstruct() != seq.ids) ++failures;
  }
  return {violations == 0 && failures == 0,
          fmt("%zu (target, position) sensitivities checked, %zu violations; %zu / 10000 reconstruction failures",
              checked, violations, failures)};
}

// 8. Learning smoke test on 32 pairs.
Outcome learning_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::World w({.pairs = 32, .images = 64, .texts = 64, .seed = 1},
                   {.vocab_size = 512, .max_text_len = 32, .texts_include_captions = false,
                    .images_include_pairs = false},
                   augment::AugmentConfig::desk_scale(), 7);
  const auto mc = desk_model(w, false);
  train::TrainConfig tc;
  tc.ratio = {0, 0, 1};
  tc.batch_size = 8;
  tc.max_steps = 2000;
  tc.warmup_steps = 100;
  tc.peak_lr = 2e-3;
  tc.seed = 3;
  tc.fully_individual = true;
  tc.share_batch_negatives = true;
  tc.tau = 0.5;
  tc.seq2seq_probability = 1.0;
  train::Trainer<float> trainer(*w.train_data, mc, tc);
  std::vector<double> totals;
  while (trainer.steps_done() < tc.max_steps) totals.push_back(trainer.step().total);
  // Mean of the last 50 steps against step 1.
  double tail = 0.0;
  for (size_t i = totals.size() - 50; i < totals.size(); ++i) tail += totals[i];
  tail /= 50.0;
  const double drop = 1.0 - tail / totals.front();

  std::vector<train::ProbePair> pairs;
  std::vector<const vision::RegionSet*> images;
  std::vector<text::TokenSequence> captions;
  for (uint32_t i = 0; i < 32; ++i) {
    pairs.push_back({&w.train_data->pair_image(i), w.train_data->caption(i).ids});
    images.push_back(&w.train_data->pair_image(i));
    captions.push_back(w.train_data->caption(i));
  }
  const auto r = train::probe_retrieval(trainer.model(), std::span<const train::ProbePair>(pairs), {1});
  const auto g = train::probe_generation(trainer.model(), std::span<const vision::RegionSet* const>(images),
                                         std::span<const text::TokenSequence>(captions), 11);
  const double elapsed = seconds_since(t0);
  const bool pass = drop >= 0.9 && r.image_to_text[0] == 1.0 && r.text_to_image[0] == 1.0 && g.accuracy() >= 0.9 &&
                    elapsed < 900.0;
  return {pass, fmt("loss %.3f -> %.3f (drop %.1f%%), R@1 %.3f / %.3f, generation %zu/%zu = %.3f, %.0fs",
                    totals.front(), tail, 100 * drop, r.image_to_text[0], r.text_to_image[0], g.matched, g.total,
                    g.accuracy(), elapsed)};
}

std::vector<double> flat_params(model::Model<double>& m) {
  std::vector<double> out;
  auto& ps = m.params();
  for (size_t i = 0; i < ps.size(); ++i) out.insert(out.end(), ps[i].value.values().begin(), ps[i].value.values().end());
  return out;
}

// 9. Bit-identical logs across runs and across save/resume.
Outcome determinism() {
  testing::World w({.pairs = 32, .images = 64, .texts = 64, .seed = 2}, {.vocab_size = 512, .max_text_len = 32},
                   augment::AugmentConfig::desk_scale(), 8);
  const auto mc = desk_model(w, true);
  train::TrainConfig tc;
  tc.max_steps = 100;
  tc.warmup_steps = 10;
  tc.seed = 17;
  tc.log_wall_time = false;
  const auto dir = scratch_dir("determinism");
  auto run = [&](const std::filesystem::path& log_path, int64_t until, const std::filesystem::path& resume_from,
                 const std::filesystem::path& save_to) {
    train::Trainer<double> t(*w.train_data, mc, tc);
    if (!resume_from.empty()) t.resume(resume_from);
    train::TrainLog log(log_path, tc.log_wall_time, !resume_from.empty());
    while (t.steps_done() < until) log.write(t.step());
    if (!save_to.empty()) t.save(save_to);
    return flat_params(t.model());
  };
  const auto pa = run(dir / "a.jsonl", 100, {}, {});
  const auto pb = run(dir / "b.jsonl", 100, {}, {});
  run(dir / "c.jsonl", 50, {}, dir / "c.ckpt");
  const auto pc = run(dir / "c.jsonl", 100, dir / "c.ckpt", {});
  const auto a = read_file(dir / "a.jsonl"), b = read_file(dir / "b.jsonl"), c = read_file(dir / "c.jsonl");
  const auto lines = std::count(a.begin(), a.end(), '\n');
  std::filesystem::remove_all(dir);
  const bool pass = lines == 100 && a == b && a == c && pa == pb && pa == pc;
  return {pass, fmt("%ld log lines; repeat run %s, resumed-at-50 run %s", static_cast<long>(lines),
                    a == b && pa == pb ? "identical" : "DIFFERS", a == c && pa == pc ? "identical" : "DIFFERS")};
}

// 10. Modality fractions of the mixer.
Outcome mixing_ratio() {
  const auto plans = train::mix_batches({64, 64, 32}, {1, 1, 5}, 7, 10, 10000);
  size_t counts[3] = {0, 0, 0}, total = 0;
  for (const auto& b : plans) {
    for (const auto& s : b.samples) {
      ++counts[static_cast<int>(s.modality)];
      ++total;
    }
  }
  const double f[3] = {counts[0] / double(total), counts[1] / double(total), counts[2] / double(total)};
  const bool pass = total == 70000 && std::abs(f[0] - 1.0 / 7) <= 0.01 && std::abs(f[1] - 1.0 / 7) <= 0.01 &&
                    std::abs(f[2] - 5.0 / 7) <= 0.01;
  return {pass, fmt("%zu samples: images %.4f, texts %.4f, pairs %.4f", total, f[0], f[1], f[2])};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient soundness", gradient_soundness},  {2, "CMCL analytic points", cmcl_points},
      {3, "masking statistics", masking_statistics},  {4, "region-mask closure", region_closure},
      {5, "retrieval oracle", retrieval_oracle},      {6, "pseudo-slot isolation", pseudo_isolation},
      {7, "seq2seq causality", seq2seq_causality},    {8, "learning smoke test", learning_smoke},
      {9, "determinism", determinism},                {10, "mixing ratio", mixing_ratio},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
