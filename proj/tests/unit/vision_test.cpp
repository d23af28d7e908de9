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
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "xmodal/errors.hpp"
#include "xmodal/vision/regions.hpp"
#include "xmodal/vision/scene.hpp"
#include "xmodal/vision/scene_io.hpp"

using namespace xmodal;
using namespace xmodal::vision;
using numerics::RngState;

namespace {

RegionBox random_box(RngState& rng) {
  const double w = rng.uniform(0.05, 0.6), h = rng.uniform(0.05, 0.6);
  const double x = rng.uniform(0, 1 - w), y = rng.uniform(0, 1 - h);
  return {x, y, x + w, y + h};
}

RegionSet random_regions(RngState& rng, size_t n, size_t k = 6, size_t d = 4) {
  RegionSet r;
  for (size_t i = 0; i < n; ++i) {
    r.boxes.push_back(random_box(rng));
    std::vector<double> f(d), p(k);
    for (double& v : f) v = rng.normal();
    double total = 0;
    for (double& v : p) total += v = std::pow(rng.uniform(), 3);
    for (double& v : p) v /= total;
    r.features.push_back(f);
    r.class_dist.push_back(p);
  }
  return r;
}

}  // namespace

TEST_CASE("overlap_ratio") {
  const RegionBox a{0.1, 0.1, 0.5, 0.5};
  CHECK(overlap_ratio(a, a) == 1.0);
  CHECK(overlap_ratio(a, RegionBox{0.6, 0.6, 0.9, 0.9}) == 0.0);
  CHECK(overlap_ratio(a, RegionBox{0.5, 0.1, 0.9, 0.5}) == 0.0);  // shared edge only
  // Intersection [0.2, 0.4] x [0, 0.4] = 0.08 over candidate area 0.16.
  CHECK(overlap_ratio({0, 0, 0.4, 0.4}, {0.2, 0, 0.6, 0.4}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(overlap_ratio({0, 0, 0.4, 0.4}, {0.2, 0, 0.6, 0.4}, OverlapMode::kIoU) ==
        doctest::Approx(0.08 / 0.24).epsilon(1e-12));
  CHECK(overlap_ratio({0, 0, 0.2, 0.2}, {0, 0, 0.4, 0.4}, OverlapMode::kMinArea) == 1.0);
  CHECK_THROWS_AS(overlap_ratio({0.3, 0.1, 0.3, 0.5}, a), InputError);
  CHECK_THROWS_AS(overlap_ratio(a, {0.5, 0.1, 0.2, 0.5}), InputError);
}

TEST_CASE("overlap_ratio: bounded, and 1 exactly for contained candidates") {
  RngState rng(3);
  for (int i = 0; i < 20000; ++i) {
    const RegionBox c = random_box(rng), a = random_box(rng);
    const double r = overlap_ratio(c, a);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    const bool inside = c.x1 >= a.x1 && c.y1 >= a.y1 && c.x2 <= a.x2 && c.y2 <= a.y2;
    CHECK(inside == (std::abs(r - 1.0) < 1e-9));
  }
}

TEST_CASE("select_regions") {
  RngState rng(9);
  SUBCASE("threshold 0 keeps everything up to max_boxes") {
    const RegionSet r = random_regions(rng, 7);
    CHECK(select_regions(r, 0.0, 10)->size() == 7);
    CHECK(select_regions(r, 0.0, 3)->size() == 3);
  }
  SUBCASE("agrees with filter-sort-truncate") {
    for (int trial = 0; trial < 200; ++trial) {
      const RegionSet r = random_regions(rng, 30);
      const double threshold = rng.uniform(0.15, 0.5);
      const size_t max_boxes = 1 + rng.uniform_int(15);
      std::vector<std::pair<double, size_t>> keyed;
      for (size_t i = 0; i < r.size(); ++i) {
        const double conf = *std::max_element(r.class_dist[i].begin(), r.class_dist[i].end());
        if (conf > threshold) keyed.push_back({-conf, i});
      }
      std::sort(keyed.begin(), keyed.end());
      if (keyed.size() > max_boxes) keyed.resize(max_boxes);
      const auto got = select_regions(r, threshold, max_boxes);
      if (keyed.empty()) {
        CHECK_FALSE(got.has_value());
        continue;
      }
      REQUIRE(got.has_value());
      REQUIRE(got->size() == keyed.size());
      for (size_t i = 0; i < keyed.size(); ++i) {
        CHECK(got->boxes[i] == r.boxes[keyed[i].second]);
        CHECK(got->features[i] == r.features[keyed[i].second]);
      }
    }
  }
  SUBCASE("everything filtered") {
    CHECK_FALSE(select_regions(random_regions(rng, 5), 1.0, 10).has_value());
  }
}

TEST_CASE("sample_region_mask") {
  RngState rng(12);
  SUBCASE("zero anchor rate") {
    const RegionSet r = random_regions(rng, 8);
    CHECK(sample_region_mask(r, rng, {.anchor_rate = 0.0}).empty());
  }
  SUBCASE("coincident regions are masked together") {
    RegionSet r = random_regions(rng, 2);
    r.boxes[1] = r.boxes[0];
    int single_anchor = 0;
    for (int i = 0; i < 2000; ++i) {
      const auto plan = sample_region_mask(r, rng);
      if (plan.anchors.size() == 1) {
        ++single_anchor;
        CHECK(plan.masked == std::vector<size_t>{0, 1});
      }
    }
    CHECK(single_anchor > 100);
  }
  SUBCASE("closure and zeroing on random sets") {
    for (int trial = 0; trial < 2000; ++trial) {
      const RegionSet r = random_regions(rng, 1 + rng.uniform_int(12));
      const auto plan = sample_region_mask(r, rng);
      const RegionSet applied = plan.apply(r);
      for (size_t a : plan.anchors) CHECK(plan.is_masked(a));
      for (size_t i = 0; i < r.size(); ++i) {
        if (plan.is_masked(i)) {
          CHECK(std::all_of(applied.features[i].begin(), applied.features[i].end(), [](double v) { return v == 0.0; }));
        } else {
          CHECK(applied.features[i] == r.features[i]);
          for (size_t a : plan.anchors) CHECK(overlap_ratio(r.boxes[i], r.boxes[a]) <= 0.3);
        }
        CHECK(applied.boxes[i] == r.boxes[i]);
      }
      CHECK(plan.target_features.size() == plan.masked.size());
    }
  }
  SUBCASE("masked-set distribution matches exact enumeration over anchor subsets") {
    // Known overlap graph: 0 covers most of 1; 2 sits inside 3; 4 is alone.
    RegionSet r = random_regions(rng, 5);
    r.boxes = {{0.0, 0.0, 0.5, 0.5}, {0.1, 0.1, 0.55, 0.55}, {0.6, 0.6, 0.7, 0.7},
               {0.55, 0.55, 0.95, 0.95}, {0.0, 0.8, 0.1, 0.9}};
    std::map<std::vector<size_t>, double> exact;
    for (unsigned subset = 0; subset < 32; ++subset) {
      double p = 1;
      std::vector<size_t> masked;
      for (size_t i = 0; i < 5; ++i) p *= (subset >> i & 1) ? 0.15 : 0.85;
      for (size_t i = 0; i < 5; ++i) {
        bool hit = false;
        for (size_t a = 0; a < 5; ++a) {
          if ((subset >> a & 1) && (a == i || overlap_ratio(r.boxes[i], r.boxes[a]) > 0.3)) hit = true;
        }
        if (hit) masked.push_back(i);
      }
      exact[masked] += p;
    }
    const int n = 10000;
    std::map<std::vector<size_t>, int> seen;
    for (int i = 0; i < n; ++i) ++seen[sample_region_mask(r, rng).masked];
    for (const auto& [set, p] : exact) {
      const double sigma = std::sqrt(p * (1 - p) / n);
      CHECK(std::abs(seen[set] / static_cast<double>(n) - p) <= 4 * sigma + 1e-12);
    }
    for (const auto& [set, count] : seen) CHECK(exact.count(set) == 1);
  }
}

TEST_CASE("render_caption") {
  SceneGraph g;
  g.objects = {"ball", "umbrella", "table"};
  g.attributes = {{0, "red"}};
  g.relations = {{0, "next to", 1}};
  CHECK(render_caption(g) == "a red ball next to an umbrella and a table");
  CHECK(render_caption(SceneGraph{}).empty());
}

TEST_CASE("generate_synthetic_scene") {
  SUBCASE("one-object grammar") {
    GrammarConfig g = GrammarConfig::desk_default();
    g.objects = {{"ball", 1.0}};
    g.max_objects = 1;
    RngState rng(4);
    const auto [scene, caption] = generate_synthetic_scene(g, rng);
    REQUIRE(scene.regions.size() == 1);
    CHECK(scene.regions.argmax_label(0) == 0);
    CHECK(caption.find("ball") != std::string::npos);
  }
  SUBCASE("determinism and invariants") {
    const GrammarConfig g = GrammarConfig::desk_default();
    RngState a(55), b(55);
    for (int i = 0; i < 200; ++i) {
      const auto [sa, ca] = generate_synthetic_scene(g, a);
      const auto [sb, cb] = generate_synthetic_scene(g, b);
      CHECK(ca == cb);
      CHECK(sa.regions == sb.regions);
      sa.regions.validate();
      CHECK(sa.regions.feature_dim() == 32);
      CHECK(sa.regions.num_classes() == 16);
      CHECK(sa.regions.size() <= 10);
      for (size_t o = 0; o < sa.object_classes.size(); ++o) {
        CHECK(sa.regions.argmax_label(o) == sa.object_classes[o]);
        CHECK(g.objects[sa.object_classes[o]].text == sa.graph.objects[o]);
      }
      CHECK(render_caption(sa.graph) == ca);
    }
  }
  SUBCASE("class frequencies follow the grammar weights") {
    const GrammarConfig g = GrammarConfig::desk_default();
    RngState rng(2026);
    std::vector<int> counts(g.num_classes(), 0);
    int total = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto [scene, caption] = generate_synthetic_scene(g, rng);
      for (size_t l : scene.regions.argmax_labels()) {
        ++counts[l];
        ++total;
      }
    }
    double wsum = 0;
    for (const auto& t : g.objects) wsum += t.weight;
    for (size_t c = 0; c < counts.size(); ++c) {
      const double p = g.objects[c].weight / wsum;
      const double sigma = std::sqrt(total * p * (1 - p));
      CHECK(std::abs(counts[c] - total * p) <= 3 * sigma);
    }
  }
  SUBCASE("configuration errors") {
    GrammarConfig g = GrammarConfig::desk_default();
    g.relations.clear();
    RngState rng(1);
    CHECK_THROWS_AS(generate_synthetic_scene(g, rng), ConfigError);
  }
}

TEST_CASE("scene files round trip, inline and with a sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "xmodal_scene_test";
  std::filesystem::create_directories(dir);
  RngState rng(31);
  std::vector<SceneRecord> records;
  for (int i = 0; i < 20; ++i) {
    auto [scene, caption] = generate_synthetic_scene(GrammarConfig::desk_default(), rng);
    records.push_back({"img" + std::to_string(i), scene.regions, i % 3 ? caption : "", scene.graph});
  }
  for (bool sidecar : {false, true}) {
    const auto path = dir / (sidecar ? "b.jsonl" : "a.jsonl");
    write_scene_file(path, records, sidecar);
    CHECK(read_scene_file(path) == records);
  }
  std::ofstream(dir / "bad.jsonl") << R"({"schema":"xmodal-scenes","version":2,"sidecar":null})" << "\n";
  CHECK_THROWS_AS(read_scene_file(dir / "bad.jsonl"), VersionMismatchError);
  std::filesystem::remove_all(dir);
}
