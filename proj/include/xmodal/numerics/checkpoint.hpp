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

#ifndef XMODAL_NUMERICS_CHECKPOINT_HPP_
#define XMODAL_NUMERICS_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "xmodal/numerics/parameter.hpp"

namespace xmodal::numerics {

// Checkpoint file layout, version 1 (all integers little-endian):
//
//   magic     8 bytes   "XMODALCK"
//   version   u32       1
//   length    u64       byte length of the manifest
//   manifest  JSON      {"format", "version", "dtype", "step", "seed",
//                        "optimizer_steps", "model_config", "train_config",
//                        "trainer_state",
//                        "arrays": [{"name", "offset", "shape"}]}
//   blob      bytes     IEEE-754 arrays, offsets relative to blob start
//   checksum  u64       FNV-1a over the blob
//
// Every parameter contributes three arrays: "<name>", "<name>#m1" and
// "<name>#m2" (Adam moments).
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointState {
  nlohmann::json model_config = nlohmann::json::object();
  nlohmann::json train_config = nlohmann::json::object();
  int64_t step = 0;
  uint64_t seed = 0;
  int64_t optimizer_steps = 0;
  // Opaque loop state (data stream cursors and the like).
  nlohmann::json trainer_state = nlohmann::json::object();
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& params,
                     const CheckpointState& state);

// Restores values and moments into an already-constructed store with the same
// names and shapes; arrays stored in the other precision are converted.
// Throws VersionMismatchError or FormatError.
template <typename T>
CheckpointState load_checkpoint(const std::filesystem::path& path, ParameterStore<T>& params);

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_CHECKPOINT_HPP_
