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

#ifndef XMODAL_VISION_REGIONS_HPP_
#define XMODAL_VISION_REGIONS_HPP_

#include <optional>
#include <vector>

#include "json.hpp"
#include "xmodal/numerics/rng.hpp"

namespace xmodal::vision {

// Normalized box, 0 <= x1 < x2 <= 1 and likewise for y.
struct RegionBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;
  // (x1, y1, x2, y2, area), the geometry fed to the model.
  std::vector<double> geometry() const { return {x1, y1, x2, y2, area()}; }
  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

struct RegionSet {
  std::vector<RegionBox> boxes;
  std::vector<std::vector<double>> features;
  std::vector<std::vector<double>> class_dist;

  size_t size() const { return boxes.size(); }
  bool empty() const { return boxes.empty(); }
  size_t feature_dim() const { return features.empty() ? 0 : features[0].size(); }
  size_t num_classes() const { return class_dist.empty() ? 0 : class_dist[0].size(); }
  // Max class probability of region i.
  double confidence(size_t i) const;
  size_t argmax_label(size_t i) const;
  std::vector<size_t> argmax_labels() const;
  // Throws InputError on ragged lists, invalid boxes, non-finite features or
  // class distributions that do not sum to 1 within 1e-6.
  void validate() const;
  friend bool operator==(const RegionSet&, const RegionSet&) = default;
};

enum class OverlapMode {
  kCandidate,  // |c ∩ a| / |c|
  kIoU,        // |c ∩ a| / |c ∪ a|
  kMinArea,    // |c ∩ a| / min(|c|, |a|)
};

// Throws InputError for degenerate boxes.
double overlap_ratio(const RegionBox& candidate, const RegionBox& anchor,
                     OverlapMode mode = OverlapMode::kCandidate);

// Keeps regions whose confidence exceeds conf_threshold, orders them by
// descending confidence (stable on index) and truncates to max_boxes.
// nullopt when nothing survives.
std::optional<RegionSet> select_regions(const RegionSet& detections, double conf_threshold = 0.2,
                                        size_t max_boxes = 10);

struct RegionMaskConfig {
  double anchor_rate = 0.15;
  double overlap_threshold = 0.3;
  OverlapMode mode = OverlapMode::kCandidate;
};

struct RegionMaskPlan {
  std::vector<size_t> anchors;
  // Ascending; contains every anchor.
  std::vector<size_t> masked;
  std::vector<std::vector<double>> target_features;
  std::vector<std::vector<double>> target_dist;

  bool empty() const { return masked.empty(); }
  bool is_masked(size_t region) const;
  // Copy of regions with masked feature rows set to zero; boxes and class
  // distributions untouched.
  RegionSet apply(const RegionSet& regions) const;
  friend bool operator==(const RegionMaskPlan&, const RegionMaskPlan&) = default;
};

// Anchors drawn by independent Bernoulli(anchor_rate) per region; every region
// whose overlap ratio with some anchor exceeds the threshold is co-masked.
RegionMaskPlan sample_region_mask(const RegionSet& regions, numerics::RngState& rng,
                                  const RegionMaskConfig& config = {});

void to_json(nlohmann::json& j, const RegionBox& b);
void from_json(const nlohmann::json& j, RegionBox& b);
void to_json(nlohmann::json& j, const RegionMaskPlan& p);
void from_json(const nlohmann::json& j, RegionMaskPlan& p);

}  // namespace xmodal::vision

#endif  // XMODAL_VISION_REGIONS_HPP_
