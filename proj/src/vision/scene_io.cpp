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

#include "xmodal/vision/scene_io.hpp"

#include <bit>
#include <fstream>

#include "xmodal/errors.hpp"

namespace xmodal::vision {

static_assert(std::endian::native == std::endian::little, "scene sidecar assumes a little-endian host");

void write_scene_file(const std::filesystem::path& path, const std::vector<SceneRecord>& records,
                      bool use_sidecar) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("scene file: cannot write " + path.string());
  std::filesystem::path sidecar_path = path;
  sidecar_path += ".bin";
  std::ofstream sidecar;
  if (use_sidecar) {
    sidecar.open(sidecar_path, std::ios::binary);
    if (!sidecar) throw InputError("scene file: cannot write " + sidecar_path.string());
  }
  nlohmann::json header = {{"schema", "xmodal-scenes"}, {"version", kSceneFileVersion}, {"sidecar", nullptr}};
  if (use_sidecar) header["sidecar"] = sidecar_path.filename().string();
  out << header.dump() << '\n';

  uint64_t offset = 0;
  for (const SceneRecord& r : records) {
    r.regions.validate();
    nlohmann::json j = {{"id", r.id}, {"boxes", r.regions.boxes}, {"class_dist", r.regions.class_dist},
                        {"caption", r.caption}};
    if (!r.graph.empty()) j["graph"] = r.graph;
    if (use_sidecar) {
      j["feature_offset"] = offset;
      j["feature_dim"] = r.regions.feature_dim();
      for (const auto& row : r.regions.features) {
        sidecar.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 8));
        offset += row.size() * 8;
      }
    } else {
      j["features"] = r.regions.features;
    }
    out << j.dump() << '\n';
  }
}

std::vector<SceneRecord> read_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("scene file: cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("scene file: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene file: bad header: ") + e.what());
  }
  if (header.value("schema", "") != "xmodal-scenes") throw FormatError("scene file: wrong schema");
  if (header.value("version", -1) != kSceneFileVersion) {
    throw VersionMismatchError("scene file: unsupported version");
  }
  std::ifstream sidecar;
  if (!header.at("sidecar").is_null()) {
    const auto sidecar_path = path.parent_path() / header.at("sidecar").get<std::string>();
    sidecar.open(sidecar_path, std::ios::binary);
    if (!sidecar) throw FormatError("scene file: missing sidecar " + sidecar_path.string());
  }

  std::vector<SceneRecord> records;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SceneRecord r;
      r.id = j.at("id").get<std::string>();
      r.caption = j.value("caption", "");
      j.at("boxes").get_to(r.regions.boxes);
      j.at("class_dist").get_to(r.regions.class_dist);
      if (j.contains("graph")) j.at("graph").get_to(r.graph);
      if (j.contains("features")) {
        j.at("features").get_to(r.regions.features);
      } else {
        if (!sidecar.is_open()) throw FormatError("record refers to a sidecar the header does not name");
        const auto dim = j.at("feature_dim").get<size_t>();
        sidecar.seekg(static_cast<std::streamoff>(j.at("feature_offset").get<uint64_t>()));
        r.regions.features.assign(r.regions.boxes.size(), std::vector<double>(dim));
        for (auto& row : r.regions.features) {
          if (!sidecar.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * 8))) {
            throw FormatError("sidecar truncated");
          }
        }
      }
      r.regions.validate();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("scene file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw FormatError("scene file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("scene file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace xmodal::vision
