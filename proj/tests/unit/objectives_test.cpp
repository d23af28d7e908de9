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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/toy.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/objectives/losses.hpp"

using namespace xmodal;
using namespace xmodal::objectives;
using model::InputPack;
using model::Model;
using numerics::RngState;
using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

namespace {

// -log(sum_pos e^{s/t} / sum_all e^{s/t}) in long double, no max shift.
long double cmcl_oracle(const CmclBatchScores& s) {
  long double pos = 0, all = 0;
  for (const auto* f : {&s.pos_p, &s.pos_i, &s.pos_t}) {
    for (double v : *f) pos += std::exp(static_cast<long double>(v) / s.tau);
  }
  all = pos;
  for (const auto* f : {&s.neg_p, &s.neg_i, &s.neg_t}) {
    for (double v : *f) all += std::exp(static_cast<long double>(v) / s.tau);
  }
  return -std::log(pos / all);
}

std::vector<double> random_scores(size_t n, RngState& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

CmclBatchScores random_batch(RngState& rng) {
  CmclBatchScores s;
  s.pos_p = random_scores(1 + rng.uniform_int(3), rng);
  s.pos_i = random_scores(rng.uniform_int(3), rng);
  s.pos_t = random_scores(rng.uniform_int(3), rng);
  s.neg_p = random_scores(rng.uniform_int(4), rng);
  s.neg_i = random_scores(rng.uniform_int(4), rng);
  s.neg_t = random_scores(rng.uniform_int(4), rng);
  return s;
}

Var<double> leaf_or_empty(const std::vector<double>& v) {
  return v.empty() ? Var<double>() : Var<double>::leaf(Tensor<double>::vector(v));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double d = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

std::vector<double> row_of(Model<double>& m, const InputPack& p, size_t slot) {
  const auto enc = m.forward(p);
  const auto r = enc.hidden.value().row(enc.layout.row(0, slot));
  return {r.begin(), r.end()};
}

std::vector<double> family(const Var<double>& v) {
  if (!v.valid()) return {};
  return {v.value().values().begin(), v.value().values().end()};
}

struct Toy {
  model::ModelConfig cfg = testing::toy_config();
  RngState rng{11};
  std::vector<vision::RegionSet> images;
  std::vector<std::vector<int32_t>> texts;

  Toy() {
    for (int i = 0; i < 8; ++i) {
      images.push_back(testing::toy_regions(2 + rng.uniform_int(4), cfg.feature_dim, cfg.num_classes, rng));
      texts.push_back(testing::toy_tokens(2 + rng.uniform_int(6), cfg.vocab_size, rng));
    }
  }

  CmclExample example(size_t g, bool rich) {
    CmclExample ex;
    ex.image = &images[g];
    ex.text = texts[g];
    if (rich) {
      ex.positives = {texts[(g + 1) % 8], texts[(g + 2) % 8]};
      ex.negatives = {texts[(g + 3) % 8]};
      ex.images = {&images[(g + 4) % 8]};
      ex.texts = {texts[(g + 5) % 8], texts[(g + 6) % 8]};
    }
    return ex;
  }
};

}  // namespace

TEST_CASE("similarity: cosine values and errors") {
  const std::vector<double> a{1, 2, 3}, b{-2, 1, 0}, z{0, 0, 0};
  CHECK(similarity(a, a).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(similarity(a, b).value == 0.0);
  CHECK(similarity(a, b, Provenance::kJoint).provenance == Provenance::kJoint);
  RngState rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_scores(7, rng), y = random_scores(7, rng);
    CHECK(std::abs(similarity(x, y).value - cosine(x, y)) < 1e-12);
  }
  CHECK_THROWS_AS(similarity(a, z), NumericError);
  CHECK_THROWS_AS(similarity(a, std::vector<double>{1, 2}), ShapeError);

  const auto ra = Var<double>::constant(Tensor<double>(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  const auto rb = Var<double>::constant(Tensor<double>(Shape{2, 3}, {-2, 1, 0, 4, 5, 6}));
  const auto rows = similarity_rows(ra, rb).value();
  CHECK(rows.size() == 2);
  CHECK(std::abs(rows[0]) < 1e-15);
  CHECK(rows[1] == doctest::Approx(1.0).epsilon(1e-15));
  const auto rz = Var<double>::constant(Tensor<double>(Shape{1, 3}));
  CHECK_THROWS_AS(similarity_rows(rz, rz), NumericError);
}

TEST_CASE("cmcl_loss: closed forms") {
  CmclBatchScores s;
  s.pos_p = {0.3, -0.2};
  s.pos_t = {0.9};
  CHECK(cmcl_loss(s) == 0.0);

  for (size_t n : {1, 2, 5}) {
    CmclBatchScores e;
    e.pos_p.assign(n, 0.4);
    e.neg_i.assign(n, 0.4);
    CHECK(std::abs(cmcl_loss(e) - std::numbers::ln2) < 1e-9);
  }

  CmclBatchScores bad;
  bad.neg_p = {0.1};
  CHECK_THROWS_AS(cmcl_loss(bad), ContractError);
  bad.pos_p = {0.1};
  bad.tau = 0.0;
  CHECK_THROWS_AS(cmcl_loss(bad), ContractError);
}

TEST_CASE("cmcl_loss: long-double oracle and monotonicity") {
  RngState rng(5);
  for (int t = 0; t < 500; ++t) {
    CmclBatchScores s = random_batch(rng);
    const double base = cmcl_loss(s);
    CHECK(std::abs(base - static_cast<double>(cmcl_oracle(s))) < 1e-12);
    CHECK(base >= 0.0);
    CmclBatchScores up = s;
    up.pos_p[0] += 0.05;
    if (!(s.neg_p.empty() && s.neg_i.empty() && s.neg_t.empty())) CHECK(cmcl_loss(up) < base);
    if (!s.neg_i.empty()) {
      CmclBatchScores harder = s;
      harder.neg_i[0] += 0.05;
      CHECK(cmcl_loss(harder) > base);
    }
  }
}

TEST_CASE("cmcl_loss: tape value and gradient") {
  RngState rng(7);
  for (int t = 0; t < 40; ++t) {
    CmclBatchScores s = random_batch(rng);
    CmclScoreVars<double> v;
    v.pos_p = leaf_or_empty(s.pos_p);
    v.pos_i = leaf_or_empty(s.pos_i);
    v.pos_t = leaf_or_empty(s.pos_t);
    v.neg_p = leaf_or_empty(s.neg_p);
    v.neg_i = leaf_or_empty(s.neg_i);
    v.neg_t = leaf_or_empty(s.neg_t);
    const auto loss = cmcl_loss(v);
    CHECK(std::abs(loss.value()[0] - cmcl_loss(s)) < 1e-12);
    numerics::backward(loss);
    const Var<double>* vars[] = {&v.pos_p, &v.pos_i, &v.pos_t, &v.neg_p, &v.neg_i, &v.neg_t};
    // d/ds_k = (e_k / Z_all - [k positive] e_k / Z_pos) / tau.
    long double z_pos = 0, z_all = 0;
    for (int f = 0; f < 6; ++f) {
      for (double x : family(*vars[f])) {
        const long double e = std::exp(static_cast<long double>(x) / s.tau);
        z_all += e;
        if (f < 3) z_pos += e;
      }
    }
    double worst = 0;
    for (int f = 0; f < 6; ++f) {
      const Var<double>& var = *vars[f];
      if (!var.valid()) continue;
      const auto g = var.grad();
      for (size_t k = 0; k < var.size(); ++k) {
        const long double e = std::exp(static_cast<long double>(var.value()[k]) / s.tau);
        const long double want = (e / z_all - (f < 3 ? e / z_pos : 0.0L)) / s.tau;
        worst = std::max(worst, std::abs(g[k] - static_cast<double>(want)));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("cmcl_loss: tape with no negatives is exactly zero") {
  CmclScoreVars<float> v;
  v.pos_p = Var<float>::leaf(Tensor<float>::vector({0.2f, 0.7f}));
  const auto loss = cmcl_loss(v);
  CHECK(loss.value()[0] == 0.0f);
  CmclScoreVars<float> none;
  CHECK_THROWS_AS(cmcl_loss(none), ContractError);
}

TEST_CASE("score_cmcl_group: family sizes and provenance") {
  Toy toy;
  Model<double> m(toy.cfg, 3);
  const std::vector<CmclExample> one{toy.example(0, false)};
  const auto s1 = score_cmcl_group(m, std::span<const CmclExample>(one), CmclConfig{});
  REQUIRE(s1.size() == 1);
  CHECK(s1[0].pos_p.size() == 1);
  CHECK_FALSE(s1[0].pos_i.valid());
  CHECK_FALSE(s1[0].neg_i.valid());
  CHECK_FALSE(s1[0].neg_t.valid());
  CHECK(cmcl_loss(s1[0]).value()[0] == 0.0);

  std::vector<CmclExample> batch;
  for (size_t g = 0; g < 4; ++g) batch.push_back(toy.example(g, true));
  const auto s4 = score_cmcl_group(m, std::span<const CmclExample>(batch), CmclConfig{});
  REQUIRE(s4.size() == 4);
  for (const auto& g : s4) {
    CHECK(g.pos_p.size() == 3);
    CHECK(g.neg_p.size() == 1);
    CHECK(g.pos_i.size() == 1);
    CHECK(g.pos_t.size() == 2);
    CHECK(g.neg_i.size() == 3);
    CHECK(g.neg_t.size() == 3);
    CHECK(g.pos_p_provenance ==
          std::vector<Provenance>{Provenance::kIndividual, Provenance::kJoint, Provenance::kJoint});
    CHECK(g.neg_p_provenance == std::vector<Provenance>{Provenance::kJoint});
    CHECK(g.tau == 0.1);
  }
  CmclConfig ind;
  ind.fully_individual = true;
  const auto si = score_cmcl_group(m, std::span<const CmclExample>(batch), ind);
  CHECK(si[0].pos_p_provenance == std::vector<Provenance>(3, Provenance::kIndividual));
  CHECK(si[0].neg_p_provenance == std::vector<Provenance>(1, Provenance::kIndividual));
}

TEST_CASE("score_cmcl_group: matches one forward per pack") {
  Toy toy;
  for (int mode = 0; mode < 4; ++mode) {
    const bool individual = (mode & 1) != 0;
    const bool share = (mode & 2) != 0;
    CAPTURE(mode);
    Model<double> m(toy.cfg, 9);
    testing::amplify(m, 20.0);
    std::vector<CmclExample> batch;
    for (size_t g = 0; g < 4; ++g) batch.push_back(toy.example(g, true));
    CmclConfig cc;
    cc.fully_individual = individual;
    cc.share_batch_negatives = share;
    const auto scores = score_cmcl_group(m, std::span<const CmclExample>(batch), cc);
    const auto& cfg = toy.cfg;
    auto img_of = [&](const vision::RegionSet& v) { return row_of(m, model::assemble_single_image(v, cfg), 0); };
    auto cls_of = [&](const std::vector<int32_t>& w) {
      const auto p = model::assemble_single_text(w, cfg);
      return row_of(m, p, p.cls_slot());
    };
    auto joint = [&](const vision::RegionSet& v, const std::vector<int32_t>& w) {
      const auto p = model::assemble_pair(v, w, cfg);
      return cosine(row_of(m, p, 0), row_of(m, p, p.cls_slot()));
    };
    double worst = 0;
    auto expect = [&](const Var<double>& got, const std::vector<double>& want) {
      const auto g = family(got);
      REQUIRE(g.size() == want.size());
      for (size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - want[i]));
    };
    for (size_t g = 0; g < batch.size(); ++g) {
      const auto& ex = batch[g];
      const auto v = img_of(*ex.image), w = cls_of(ex.text);
      std::vector<double> pos_p{cosine(v, w)}, neg_p, pos_i, pos_t, neg_i, neg_t;
      for (const auto& t : ex.positives) pos_p.push_back(individual ? cosine(v, cls_of(t)) : joint(*ex.image, t));
      for (const auto& t : ex.negatives) neg_p.push_back(individual ? cosine(v, cls_of(t)) : joint(*ex.image, t));
      for (const auto* r : ex.images) pos_i.push_back(cosine(img_of(*r), w));
      for (const auto& t : ex.texts) pos_t.push_back(cosine(v, cls_of(t)));
      for (size_t h = 0; h < batch.size(); ++h) {
        if (h == g) continue;
        neg_i.push_back(cosine(img_of(*batch[h].image), w));
        neg_t.push_back(cosine(v, cls_of(batch[h].text)));
      }
      for (size_t h = 0; share && h < batch.size(); ++h) {
        if (h == g) continue;
        for (const auto* r : batch[h].images) neg_i.push_back(cosine(img_of(*r), w));
        for (const auto& t : batch[h].texts) neg_t.push_back(cosine(v, cls_of(t)));
        if (!individual) continue;
        for (const auto& t : batch[h].positives) neg_t.push_back(cosine(v, cls_of(t)));
      }
      expect(scores[g].pos_p, pos_p);
      expect(scores[g].neg_p, neg_p);
      expect(scores[g].pos_i, pos_i);
      expect(scores[g].pos_t, pos_t);
      expect(scores[g].neg_i, neg_i);
      expect(scores[g].neg_t, neg_t);
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("score_cmcl_group: parameter gradient matches finite differences") {
  Toy toy;
  Model<double> m(toy.cfg, 4);
  testing::amplify(m, 10.0);
  std::vector<CmclExample> batch;
  for (size_t g = 0; g < 3; ++g) batch.push_back(toy.example(g, true));
  auto total = [&] {
    const auto s = score_cmcl_group(m, std::span<const CmclExample>(batch), CmclConfig{});
    Var<double> acc = cmcl_loss(s[0]);
    for (size_t g = 1; g < s.size(); ++g) acc = numerics::add(acc, cmcl_loss(s[g]));
    return acc;
  };
  m.params().zero_grad();
  numerics::backward(total());
  for (const char* name : {"layer0.query.weight", "embeddings.feature.weight", "layer1.ffn_out.bias"}) {
    auto& p = m.params().get(name);
    const Tensor<double> analytic = p.grad;
    const double worst = testing::finite_difference_check(
        p.value, [&] { return total().value()[0]; }, analytic, 1e-6, 1e-6);
    CHECK_MESSAGE(worst < 1e-5, name);
  }
}

TEST_CASE("visual_loss: empty, entropy floor and formula") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg, 2);
  RngState rng(21);
  const auto h0 = Var<double>::constant(Tensor<double>(Shape{0, cfg.hidden}));
  CHECK(visual_loss_rows(m, h0, {}, {}).value()[0] == 0.0);

  const auto regions = testing::toy_regions(1, cfg.feature_dim, cfg.num_classes, rng);
  const auto& v = regions.features[0];
  const auto& c = regions.class_dist[0];
  m.params().get("visual.regression.weight").value.fill(0.0);
  m.params().get("visual.classification.weight").value.fill(0.0);
  for (size_t i = 0; i < v.size(); ++i) m.params().get("visual.regression.bias").value[i] = v[i];
  double entropy = 0;
  for (size_t i = 0; i < c.size(); ++i) {
    m.params().get("visual.classification.bias").value[i] = std::log(c[i]);
    entropy -= c[i] * std::log(c[i]);
  }
  Tensor<double> h(Shape{1, cfg.hidden});
  for (double& x : h.values()) x = rng.normal();
  const double floor = visual_loss_rows(m, Var<double>::constant(h), regions.features, regions.class_dist).value()[0];
  CHECK(std::abs(floor - entropy) < 1e-12);
}

TEST_CASE("visual_loss: per-region formula, reductions and gradient") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg, 6);
  testing::amplify(m, 10.0);
  RngState rng(22);
  const size_t n = 4;
  const auto regions = testing::toy_regions(n, cfg.feature_dim, cfg.num_classes, rng);
  Tensor<double> h(Shape{n, cfg.hidden});
  for (double& x : h.values()) x = rng.normal();

  // Direct evaluation from the head parameters.
  const auto& wr = m.params().get("visual.regression.weight").value;
  const auto& br = m.params().get("visual.regression.bias").value;
  const auto& wc = m.params().get("visual.classification.weight").value;
  const auto& bc = m.params().get("visual.classification.bias").value;
  auto oracle = [&](const Tensor<double>& hh) {
    double total = 0;
    for (size_t r = 0; r < n; ++r) {
      for (size_t j = 0; j < cfg.feature_dim; ++j) {
        double y = br[j];
        for (size_t k = 0; k < cfg.hidden; ++k) y += hh.at(r, k) * wr.at(k, j);
        total += (y - regions.features[r][j]) * (y - regions.features[r][j]);
      }
      std::vector<double> s(cfg.num_classes);
      double mx = -INFINITY, z = 0;
      for (size_t j = 0; j < s.size(); ++j) {
        s[j] = bc[j];
        for (size_t k = 0; k < cfg.hidden; ++k) s[j] += hh.at(r, k) * wc.at(k, j);
        mx = std::max(mx, s[j]);
      }
      for (double x : s) z += std::exp(x - mx);
      for (size_t j = 0; j < s.size(); ++j) total -= regions.class_dist[r][j] * (s[j] - mx - std::log(z));
    }
    return total;
  };
  auto leaf = Var<double>::leaf(h);
  const auto sum = visual_loss_rows(m, leaf, regions.features, regions.class_dist, Reduction::kSum);
  const auto mean = visual_loss_rows(m, Var<double>::constant(h), regions.features, regions.class_dist);
  CHECK(std::abs(sum.value()[0] - oracle(h)) < 1e-9);
  CHECK(std::abs(mean.value()[0] * n - sum.value()[0]) < 1e-9);
  numerics::backward(sum);
  const double worst = testing::finite_difference_check(h, [&] { return oracle(h); }, leaf.grad(), 1e-6, 1e-6);
  CHECK(worst < 1e-6);

  CHECK_THROWS_AS(visual_loss_rows(m, leaf, regions.features, {}), ShapeError);
}

TEST_CASE("visual_loss: reads the masked region slots of a pack") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg, 8);
  RngState rng(23);
  const auto regions = testing::toy_regions(4, cfg.feature_dim, cfg.num_classes, rng);
  vision::RegionMaskPlan plan;
  plan.anchors = {1};
  plan.masked = {1, 3};
  for (size_t r : plan.masked) {
    plan.target_features.push_back(regions.features[r]);
    plan.target_dist.push_back(regions.class_dist[r]);
  }
  const auto pack = model::assemble_pair(plan.apply(regions), testing::toy_tokens(3, cfg.vocab_size, rng), cfg);
  const auto enc = m.forward(pack);
  const std::vector<size_t> rows{enc.layout.row(0, pack.region_slot(1)), enc.layout.row(0, pack.region_slot(3))};
  const double direct =
      visual_loss_rows(m, enc.rows(rows), plan.target_features, plan.target_dist).value()[0];
  CHECK(visual_loss(m, enc, 0, plan).value()[0] == direct);
  CHECK(visual_loss(m, enc, 0, vision::RegionMaskPlan{}).value()[0] == 0.0);
  vision::RegionMaskPlan outside = plan;
  outside.masked = {1, 7};
  CHECK_THROWS_AS(visual_loss(m, enc, 0, outside), ContractError);
}

TEST_CASE("bidirectional_loss: closed forms and gradient") {
  auto cfg = testing::toy_config();
  cfg.vocab_size = 1000;
  Model<double> m(cfg, 5);
  RngState rng(31);
  const auto tokens = testing::toy_tokens(6, cfg.vocab_size, rng);
  const auto pack = model::assemble_single_text(tokens, cfg);
  text::MaskingPlan plan;
  plan.positions = {2, 4};
  plan.targets = {tokens[2], tokens[4]};
  plan.actions = {text::MaskAction::kKeep, text::MaskAction::kKeep};
  plan.replacements = plan.targets;
  const auto enc = m.forward(pack);

  CHECK_FALSE(bidirectional_loss(m, enc, 0, text::MaskingPlan{}).has_value());
  const auto t = bidirectional_targets(pack, plan);
  CHECK(t.slots == std::vector<size_t>{pack.token_slot(2), pack.token_slot(4)});

  m.params().get("lm_head.weight").value.fill(0.0);
  m.params().get("lm_head.bias").value.fill(0.0);
  CHECK(std::abs(bidirectional_loss(m, enc, 0, plan)->value()[0] - std::log(1000.0)) < 1e-12);
  // Two distinct targets share the logit mass; one alone takes all of it.
  for (int32_t id : plan.targets) m.params().get("lm_head.bias").value[id] = 1000.0;
  CHECK(std::abs(bidirectional_loss(m, enc, 0, plan)->value()[0] - std::numbers::ln2) < 1e-12);
  text::MaskingPlan single = plan;
  single.positions = {2};
  single.targets = {tokens[2]};
  m.params().get("lm_head.bias").value[tokens[4]] = 0.0;
  CHECK(bidirectional_loss(m, enc, 0, single)->value()[0] < 1e-12);

  text::MaskingPlan bad = plan;
  bad.positions = {20};
  CHECK_THROWS_AS(bidirectional_targets(pack, bad), ContractError);
}

TEST_CASE("token_nll_rows: gradient") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg, 12);
  testing::amplify(m, 10.0);
  RngState rng(32);
  Tensor<double> h(Shape{3, cfg.hidden});
  for (double& x : h.values()) x = rng.normal();
  const std::vector<int32_t> targets{7, 9, 30};
  auto leaf = Var<double>::leaf(h);
  numerics::backward(token_nll_rows(m, leaf, targets));
  const double worst = testing::finite_difference_check(
      h, [&] { return token_nll_rows(m, Var<double>::constant(h), targets).value()[0]; }, leaf.grad(), 1e-6, 1e-6);
  CHECK(worst < 1e-6);
  CHECK_THROWS_AS(token_nll_rows(m, leaf, std::vector<int32_t>{}), ContractError);
}

TEST_CASE("seq2seq_loss: teacher forcing targets and causality") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg, 13);
  testing::amplify(m, 20.0);
  RngState rng(41);
  const std::vector<int32_t> source{text::kCls, 10, 11, text::kSep};
  text::Seq2SeqSplit split;
  split.source = source;
  split.target = {text::kCls, 20, 21, 22, text::kSep};
  const auto src_pack = model::assemble_single_text(source, cfg);
  const auto pack = model::append_target(src_pack, split.target, cfg);
  const auto t = seq2seq_targets(pack, split);
  CHECK(t.targets == std::vector<int32_t>{20, 21, 22, text::kSep});
  CHECK(t.slots == std::vector<size_t>{pack.token_slot(4), pack.token_slot(5), pack.token_slot(6),
                                       pack.token_slot(7)});
  CHECK_THROWS_AS(seq2seq_targets(src_pack, split), ContractError);

  // Rows up to target j do not move when later target tokens change.
  text::Seq2SeqSplit other = split;
  other.target = {text::kCls, 20, 33, 34, text::kSep};
  const auto pack2 = model::append_target(src_pack, other.target, cfg);
  const auto e1 = m.forward(pack), e2 = m.forward(pack2);
  for (size_t j = 0; j < 2; ++j) {
    const auto a = e1.hidden.value().row(e1.layout.row(0, pack.token_slot(4 + j)));
    const auto b = e2.hidden.value().row(e2.layout.row(0, pack2.token_slot(4 + j)));
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  const auto a3 = e1.hidden.value().row(e1.layout.row(0, pack.token_slot(6)));
  const auto b3 = e2.hidden.value().row(e2.layout.row(0, pack2.token_slot(6)));
  CHECK_FALSE(std::equal(a3.begin(), a3.end(), b3.begin()));

  text::Seq2SeqSplit lone;
  lone.source = source;
  lone.target = {text::kCls};
  const auto lone_pack = model::append_target(src_pack, lone.target, cfg);
  CHECK_FALSE(seq2seq_loss(m, m.forward(lone_pack), 0, lone).has_value());
}

TEST_CASE("seq2seq_loss: perfect single prediction and gradient") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg, 14);
  const std::vector<int32_t> source{text::kCls, 10, 11, text::kSep};
  text::Seq2SeqSplit split;
  split.source = source;
  split.target = {text::kCls, 25};
  const auto pack = model::append_target(model::assemble_single_text(source, cfg), split.target, cfg);
  m.params().get("lm_head.weight").value.fill(0.0);
  m.params().get("lm_head.bias").value[25] = 1000.0;
  CHECK(seq2seq_loss(m, m.forward(pack), 0, split)->value()[0] < 1e-12);

  Model<double> g(cfg, 15);
  testing::amplify(g, 10.0);
  split.target = {text::kCls, 25, 26, text::kSep};
  const auto p2 = model::append_target(model::assemble_single_text(source, cfg), split.target, cfg);
  g.params().zero_grad();
  numerics::backward(*seq2seq_loss(g, g.forward(p2), 0, split));
  auto& w = g.params().get("layer1.value.weight");
  const Tensor<double> analytic = w.grad;
  const double worst = testing::finite_difference_check(
      w.value, [&] { return seq2seq_loss(g, g.forward(p2), 0, split)->value()[0]; }, analytic, 1e-5, 1e-6);
  CHECK(worst < 1e-5);
}

TEST_CASE("objectives: float instantiation agrees with double") {
  Toy toy;
  Model<double> md(toy.cfg, 17);
  Model<float> mf(toy.cfg, 17);
  std::vector<CmclExample> batch;
  for (size_t g = 0; g < 3; ++g) batch.push_back(toy.example(g, true));
  const auto sd = score_cmcl_group(md, std::span<const CmclExample>(batch), CmclConfig{});
  const auto sf = score_cmcl_group(mf, std::span<const CmclExample>(batch), CmclConfig{});
  for (size_t g = 0; g < 3; ++g) {
    CHECK(std::abs(cmcl_loss(sd[g]).value()[0] - cmcl_loss(sf[g]).value()[0]) < 1e-4);
  }
}
