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

#ifndef XMODAL_VISION_SCENE_IO_HPP_
#define XMODAL_VISION_SCENE_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/vision/scene.hpp"

namespace xmodal::vision {

// One image. caption is empty for image-only records; graph is empty when
// no ground truth is known.
struct SceneRecord {
  std::string id;
  RegionSet regions;
  std::string caption;
  SceneGraph graph;
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

inline constexpr int kSceneFileVersion = 1;

// Line-delimited JSON. The first line is a header
//   {"schema": "xmodal-scenes", "version": 1, "sidecar": <file name or null>}
// and every further line one record
//   {"id", "boxes": [[x1, y1, x2, y2]..], "class_dist": [[..]..], "caption",
//    "graph"?, and either "features": [[..]..] or "feature_offset" (bytes into
//    the sidecar) with "feature_dim"}.
// With a sidecar, features are stored as little-endian float64 rows in
// <path>.bin, which keeps the text file small and exact.
void write_scene_file(const std::filesystem::path& path, const std::vector<SceneRecord>& records,
                      bool use_sidecar = false);
std::vector<SceneRecord> read_scene_file(const std::filesystem::path& path);

}  // namespace xmodal::vision

#endif  // XMODAL_VISION_SCENE_IO_HPP_
