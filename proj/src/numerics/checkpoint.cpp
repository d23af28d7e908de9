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

#include "xmodal/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal::numerics {

namespace {

constexpr char kMagic[8] = {'X', 'M', 'O', 'D', 'A', 'L', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

uint64_t fnv1a(const std::vector<char>& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename U>
void put(std::vector<char>& out, U v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

template <typename U>
U get(const std::vector<char>& in, size_t& at) {
  if (at + sizeof(U) > in.size()) throw FormatError("checkpoint: truncated file");
  U v;
  std::memcpy(&v, in.data() + at, sizeof(U));
  at += sizeof(U);
  return v;
}

template <typename T>
constexpr const char* dtype_name() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

struct Parsed {
  nlohmann::json manifest;
  std::vector<char> blob;
};

Parsed parse_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("checkpoint: bad magic in " + path.string());
  }
  size_t at = sizeof(kMagic);
  const auto version = get<uint32_t>(bytes, at);
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint: version " + std::to_string(version) +
                               ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto mlen = get<uint64_t>(bytes, at);
  if (at + mlen > bytes.size()) throw FormatError("checkpoint: truncated manifest");
  Parsed parsed;
  try {
    parsed.manifest = nlohmann::json::parse(bytes.begin() + at, bytes.begin() + at + mlen);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
  }
  at += mlen;
  if (bytes.size() < at + sizeof(uint64_t)) throw FormatError("checkpoint: missing checksum");
  const size_t blob_end = bytes.size() - sizeof(uint64_t);
  parsed.blob.assign(bytes.begin() + at, bytes.begin() + blob_end);
  size_t cat = blob_end;
  const auto checksum = get<uint64_t>(bytes, cat);
  if (checksum != fnv1a(parsed.blob)) throw FormatError("checkpoint: checksum mismatch");
  return parsed;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& params,
                     const CheckpointState& state) {
  std::vector<char> blob;
  nlohmann::json arrays = nlohmann::json::array();
  auto append = [&](const std::string& name, const Tensor<T>& t) {
    arrays.push_back({{"name", name}, {"offset", blob.size()}, {"shape", t.shape()}});
    for (T v : t.values()) put(blob, v);
  };
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    append(p.name, p.value);
    append(p.name + "#m1", p.moment1);
    append(p.name + "#m2", p.moment2);
  }
  nlohmann::json manifest = {
      {"format", "xmodal-checkpoint"},
      {"version", kCheckpointVersion},
      {"dtype", dtype_name<T>()},
      {"step", state.step},
      {"seed", state.seed},
      {"optimizer_steps", state.optimizer_steps},
      {"model_config", state.model_config},
      {"train_config", state.train_config},
      {"trainer_state", state.trainer_state},
      {"arrays", arrays},
  };
  const std::string text = manifest.dump();
  std::vector<char> out(kMagic, kMagic + sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  put(out, fnv1a(blob));

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("checkpoint: cannot write " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
CheckpointState load_checkpoint(const std::filesystem::path& path, ParameterStore<T>& params) {
  Parsed parsed = parse_file(path);
  const auto& m = parsed.manifest;
  CheckpointState state;
  std::string dtype;
  try {
    dtype = m.at("dtype").get<std::string>();
    state.step = m.at("step").get<int64_t>();
    state.seed = m.at("seed").get<uint64_t>();
    state.optimizer_steps = m.at("optimizer_steps").get<int64_t>();
    state.model_config = m.at("model_config");
    state.train_config = m.at("train_config");
    state.trainer_state = m.value("trainer_state", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: incomplete manifest: ") + e.what());
  }
  if (dtype != "float32" && dtype != "float64") throw FormatError("checkpoint: unknown dtype " + dtype);
  const size_t width = dtype == "float32" ? 4 : 8;

  std::map<std::string, std::pair<size_t, Shape>> table;
  try {
    for (const auto& a : m.at("arrays")) {
      table[a.at("name").get<std::string>()] = {a.at("offset").get<size_t>(),
                                                a.at("shape").get<Shape>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: corrupted array table: ") + e.what());
  }
  if (table.size() != params.size() * 3) {
    throw FormatError("checkpoint: array table has " + std::to_string(table.size()) +
                      " entries, model expects " + std::to_string(params.size() * 3));
  }

  auto restore = [&](const std::string& name, Tensor<T>& dst) {
    auto it = table.find(name);
    if (it == table.end()) throw FormatError("checkpoint: missing array " + name);
    const auto& [offset, shape] = it->second;
    if (shape != dst.shape()) {
      throw FormatError("checkpoint: array " + name + " has shape " + shape_string(shape) +
                        ", model expects " + shape_string(dst.shape()));
    }
    if (offset + dst.size() * width > parsed.blob.size()) {
      throw FormatError("checkpoint: array " + name + " overruns the data blob");
    }
    size_t at = offset;
    for (T& v : dst.values()) {
      v = width == 4 ? static_cast<T>(get<float>(parsed.blob, at))
                     : static_cast<T>(get<double>(parsed.blob, at));
    }
  };
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    restore(p.name, p.value);
    restore(p.name + "#m1", p.moment1);
    restore(p.name + "#m2", p.moment2);
    p.zero_grad();
  }
  return state;
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  return parse_file(path).manifest;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ParameterStore<float>&,
                                     const CheckpointState&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParameterStore<double>&,
                                      const CheckpointState&);
template CheckpointState load_checkpoint<float>(const std::filesystem::path&, ParameterStore<float>&);
template CheckpointState load_checkpoint<double>(const std::filesystem::path&, ParameterStore<double>&);

}  // namespace xmodal::numerics
