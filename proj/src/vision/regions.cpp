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

#include "xmodal/vision/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xmodal/errors.hpp"

namespace xmodal::vision {

bool RegionBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 >= 0 && y1 >= 0 && x2 <= 1 && y2 <= 1 && x1 < x2 && y1 < y2;
}

double RegionSet::confidence(size_t i) const {
  return *std::max_element(class_dist.at(i).begin(), class_dist.at(i).end());
}

size_t RegionSet::argmax_label(size_t i) const {
  const auto& d = class_dist.at(i);
  return static_cast<size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::vector<size_t> RegionSet::argmax_labels() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < size(); ++i) out.push_back(argmax_label(i));
  return out;
}

void RegionSet::validate() const {
  if (features.size() != boxes.size() || class_dist.size() != boxes.size()) {
    throw InputError("region set: boxes, features and class distributions differ in length");
  }
  for (size_t i = 0; i < size(); ++i) {
    if (!boxes[i].valid()) throw InputError("region set: invalid box at " + std::to_string(i));
    if (features[i].size() != feature_dim() || class_dist[i].size() != num_classes()) {
      throw InputError("region set: ragged rows at " + std::to_string(i));
    }
    for (double v : features[i]) {
      if (!std::isfinite(v)) throw InputError("region set: non-finite feature at " + std::to_string(i));
    }
    double total = 0;
    for (double p : class_dist[i]) {
      if (!(p >= 0)) throw InputError("region set: negative class probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw InputError("region set: class distribution " + std::to_string(i) + " does not sum to 1");
    }
  }
}

double overlap_ratio(const RegionBox& candidate, const RegionBox& anchor, OverlapMode mode) {
  if (!candidate.valid() || !anchor.valid()) throw InputError("overlap_ratio: degenerate box");
  const double w = std::min(candidate.x2, anchor.x2) - std::max(candidate.x1, anchor.x1);
  const double h = std::min(candidate.y2, anchor.y2) - std::max(candidate.y1, anchor.y1);
  if (w <= 0 || h <= 0) return 0.0;
  const double inter = w * h;
  double denom = candidate.area();
  if (mode == OverlapMode::kIoU) denom = candidate.area() + anchor.area() - inter;
  if (mode == OverlapMode::kMinArea) denom = std::min(candidate.area(), anchor.area());
  return std::clamp(inter / denom, 0.0, 1.0);
}

std::optional<RegionSet> select_regions(const RegionSet& detections, double conf_threshold,
                                        size_t max_boxes) {
  std::vector<size_t> keep;
  for (size_t i = 0; i < detections.size(); ++i) {
    if (detections.confidence(i) > conf_threshold) keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](size_t a, size_t b) {
    return detections.confidence(a) > detections.confidence(b);
  });
  if (keep.size() > max_boxes) keep.resize(max_boxes);
  if (keep.empty()) return std::nullopt;
  RegionSet out;
  for (size_t i : keep) {
    out.boxes.push_back(detections.boxes[i]);
    out.features.push_back(detections.features[i]);
    out.class_dist.push_back(detections.class_dist[i]);
  }
  return out;
}

bool RegionMaskPlan::is_masked(size_t region) const {
  return std::binary_search(masked.begin(), masked.end(), region);
}

RegionSet RegionMaskPlan::apply(const RegionSet& regions) const {
  RegionSet out = regions;
  for (size_t i : masked) {
    if (i >= out.size()) throw ContractError("region mask: index outside region set");
    std::fill(out.features[i].begin(), out.features[i].end(), 0.0);
  }
  return out;
}

RegionMaskPlan sample_region_mask(const RegionSet& regions, numerics::RngState& rng,
                                  const RegionMaskConfig& config) {
  RegionMaskPlan plan;
  for (size_t i = 0; i < regions.size(); ++i) {
    if (rng.bernoulli(config.anchor_rate)) plan.anchors.push_back(i);
  }
  for (size_t i = 0; i < regions.size(); ++i) {
    const bool hit = std::any_of(plan.anchors.begin(), plan.anchors.end(), [&](size_t a) {
      return a == i || overlap_ratio(regions.boxes[i], regions.boxes[a], config.mode) > config.overlap_threshold;
    });
    if (!hit) continue;
    plan.masked.push_back(i);
    plan.target_features.push_back(regions.features[i]);
    plan.target_dist.push_back(regions.class_dist[i]);
  }
  return plan;
}

void to_json(nlohmann::json& j, const RegionBox& b) { j = {b.x1, b.y1, b.x2, b.y2}; }
void from_json(const nlohmann::json& j, RegionBox& b) {
  b = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

void to_json(nlohmann::json& j, const RegionMaskPlan& p) {
  j = {{"anchors", p.anchors}, {"masked", p.masked}, {"target_features", p.target_features},
       {"target_dist", p.target_dist}};
}
void from_json(const nlohmann::json& j, RegionMaskPlan& p) {
  j.at("anchors").get_to(p.anchors);
  j.at("masked").get_to(p.masked);
  j.at("target_features").get_to(p.target_features);
  j.at("target_dist").get_to(p.target_dist);
}

}  // namespace xmodal::vision
