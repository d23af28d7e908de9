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

// Command-line front end: synth, index, augment, train, probe, export.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "xmodal/augment/translate.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/numerics/checkpoint.hpp"
#include "xmodal/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xmodal;

namespace {

constexpr const char* kVocabFile = "vocab.json";
constexpr const char* kGroupsFile = "groups.jsonl";
constexpr const char* kLogFile = "train_log.jsonl";
constexpr const char* kCheckpointFile = "checkpoint.ckpt";

// Exit codes.
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitError = 1;

json default_config() {
  train::PoolConfig pool;
  pool.max_text_len = 32;
  train::TrainConfig tc;
  return {
      {"synth", {{"pairs", 32}, {"images", 64}, {"texts", 64}}},
      {"pool", pool},
      {"augment", augment::AugmentConfig::desk_scale()},
      {"model", model::ModelConfig::desk()},
      {"train", tc},
      {"run",
       {{"precision", "float"},
        {"checkpoint_every", 0},
        {"embedder_dim", 16},
        {"probe_k", {1, 5, 10}},
        {"probe_seed", 0}}},
  };
}

// Leaf paths ("train.peak_lr") of a config object. Arrays count as leaves.
void leaf_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      leaf_paths(value, path, out);
    } else {
      out.push_back(path);
    }
  }
}

json::json_pointer pointer_of(const std::string& path) {
  std::string p = "/" + path;
  for (char& c : p) {
    if (c == '.') c = '/';
  }
  return json::json_pointer(p);
}

// Flag text is parsed as JSON when possible, else taken as a string.
json parse_flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

// Config file plus one override flag per config key.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "JSON config file; keys mirror the printed defaults");
    std::vector<std::string> paths;
    leaf_paths(default_config(), "", paths);
    for (const auto& p : paths) {
      app->add_option("--" + p, overrides[p], "override config key " + p)->group("Config keys");
    }
  }

  json resolve() const {
    json config = default_config();
    if (!file.empty()) {
      std::ifstream f(file);
      if (!f) throw InputError("cannot read config " + file);
      json user;
      try {
        user = json::parse(f);
      } catch (const json::exception& e) {
        throw ConfigError("config " + file + ": " + e.what());
      }
      std::vector<std::string> known, given;
      leaf_paths(config, "", known);
      leaf_paths(user, "", given);
      for (const auto& g : given) {
        if (std::find(known.begin(), known.end(), g) == known.end()) {
          throw ConfigError("config " + file + ": unknown key '" + g + "'");
        }
      }
      config.merge_patch(user);
    }
    for (const auto& [path, text] : overrides) {
      if (!text.empty()) config[pointer_of(path)] = parse_flag_value(text);
    }
    return config;
  }
};

model::ModelConfig model_config(const json& c) {
  try {
    return c.at("model").get<model::ModelConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

train::PoolConfig pool_config(const json& c) { return c.at("pool").get<train::PoolConfig>(); }

// Dataset plus the resources derived from it; reuses an indexed vocabulary.
struct Workspace {
  train::Dataset data;
  std::unique_ptr<train::DataResources> resources;

  Workspace(const fs::path& dir, const train::PoolConfig& pool) {
    data = train::load_dataset(dir);
    if (fs::exists(dir / kVocabFile)) {
      resources = std::make_unique<train::DataResources>(data, pool, text::Vocabulary::load(dir / kVocabFile));
    } else {
      resources = std::make_unique<train::DataResources>(data, pool);
    }
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

int run_synth(const json& config, const fs::path& out, uint64_t seed) {
  train::SyntheticDataConfig sc;
  sc.pairs = config.at("synth").at("pairs").get<size_t>();
  sc.images = config.at("synth").at("images").get<size_t>();
  sc.texts = config.at("synth").at("texts").get<size_t>();
  sc.seed = seed;
  fs::create_directories(out);
  const auto data = train::generate_synthetic_dataset(sc);
  train::save_dataset(out, data);
  std::cout << json{{"pairs", data.pairs.size()}, {"images", data.images.size()}, {"texts", data.texts.size()},
                    {"dir", out.string()}}
                   .dump()
            << '\n';
  return 0;
}

int run_index(const json& config, const fs::path& data_dir) {
  Workspace ws(data_dir, pool_config(config));
  const auto& r = *ws.resources;
  r.vocabulary().save(data_dir / kVocabFile);
  r.image_index().save(data_dir / "image_index.json");
  r.text_index().save(data_dir / "text_index.json");
  std::cout << json{{"vocab_size", r.vocabulary().size()},
                    {"image_pool", r.image_pool().size()},
                    {"text_pool", r.text_pool().size()}}
                   .dump()
            << '\n';
  return 0;
}

int run_augment(const json& config, const fs::path& data_dir, const fs::path& out, uint64_t seed) {
  Workspace ws(data_dir, pool_config(config));
  const auto ac = config.at("augment").get<augment::AugmentConfig>();
  const auto dim = config.at("run").at("embedder_dim").get<size_t>();
  const auto embedder = train::make_token_embedder(*ws.resources, dim, seed);
  const augment::ParaphraseTranslator translator;
  const auto groups = train::build_all_groups(*ws.resources, ac, translator, embedder, seed);
  augment::write_group_file(out, groups);
  size_t short_groups = 0;
  for (const auto& g : groups) short_groups += g.shortfalls.empty() ? 0 : 1;
  std::cout << json{{"groups", groups.size()}, {"with_shortfalls", short_groups}, {"file", out.string()}}.dump()
            << '\n';
  return 0;
}

template <typename T>
int train_loop(const json& config, const train::TrainData& td, const fs::path& out, const std::string& resume,
               std::optional<int64_t> until, bool quiet) {
  const auto tc = config.at("train").get<train::TrainConfig>();
  train::Trainer<T> trainer(td, model_config(config), tc);
  if (!resume.empty()) {
    trainer.resume(resume);
    spdlog::info("resumed at step {}", trainer.steps_done());
  }
  const int64_t stop = until.value_or(tc.max_steps);
  if (stop > tc.max_steps) throw ConfigError("--steps exceeds train.max_steps");
  const auto every = config.at("run").at("checkpoint_every").get<int64_t>();
  train::TrainLog log(out / kLogFile, tc.log_wall_time, !resume.empty(), quiet ? nullptr : &std::cout);
  while (trainer.steps_done() < stop) {
    try {
      log.write(trainer.step());
    } catch (const train::TrainingDiverged& e) {
      write_json(out / "divergence.json", e.dump());
      spdlog::error("{}", e.what());
      return kExitDiverged;
    }
    if (every > 0 && trainer.steps_done() % every == 0) trainer.save(out / kCheckpointFile);
  }
  trainer.save(out / kCheckpointFile);
  return 0;
}

int run_train(json config, const fs::path& data_dir, const fs::path& groups_file, const fs::path& out,
              uint64_t seed, const std::string& resume, std::optional<int64_t> until, bool quiet) {
  config["train"]["seed"] = seed;
  Workspace ws(data_dir, pool_config(config));
  // Vocabulary and region feature sizes always follow the data.
  config["model"]["vocab_size"] = ws.resources->vocabulary().size();
  config["model"]["feature_dim"] = ws.data.grammar.feature_dim;
  config["model"]["num_classes"] = ws.data.grammar.num_classes();
  fs::create_directories(out);
  write_json(out / "config.json", config);
  const auto groups = augment::read_group_file(groups_file);
  const train::TrainData td(*ws.resources, groups);
  const auto precision = config.at("run").at("precision").get<std::string>();
  if (precision == "double") return train_loop<double>(config, td, out, resume, until, quiet);
  if (precision == "float") return train_loop<float>(config, td, out, resume, until, quiet);
  throw ConfigError("run.precision must be 'float' or 'double'");
}

template <typename T>
json probe_with(const model::ModelConfig& mc, const fs::path& checkpoint, const Workspace& ws,
                std::vector<size_t> ks, uint64_t seed) {
  model::Model<T> model(mc, 0);
  numerics::load_checkpoint(checkpoint, model.params());
  const auto& tok = ws.resources->tokenizer();
  std::vector<train::ProbePair> pairs;
  std::vector<const vision::RegionSet*> images;
  std::vector<text::TokenSequence> captions;
  for (const auto& p : ws.data.pairs) {
    captions.push_back(tok.encode(p.caption));
    images.push_back(&p.regions);
    pairs.push_back({&p.regions, captions.back().ids});
  }
  const auto r = train::probe_retrieval(model, std::span<const train::ProbePair>(pairs), ks);
  const auto g = train::probe_generation(model, std::span<const vision::RegionSet* const>(images),
                                         std::span<const text::TokenSequence>(captions), seed);
  json samples = json::array();
  for (size_t i = 0; i < std::min<size_t>(5, g.samples.size()); ++i) {
    const auto& s = g.samples[i];
    samples.push_back({{"source", tok.decode(s.source)},
                       {"target", tok.decode(s.target)},
                       {"generated", tok.decode(s.generated)},
                       {"matched", s.matched}});
  }
  json recall = json::object();
  for (size_t i = 0; i < r.ks.size(); ++i) {
    recall["R@" + std::to_string(r.ks[i])] = {{"image_to_text", r.image_to_text[i]},
                                              {"text_to_image", r.text_to_image[i]}};
  }
  return {{"pairs", pairs.size()},
          {"retrieval", recall},
          {"generation", {{"matched", g.matched}, {"total", g.total}, {"accuracy", g.accuracy()}, {"samples", samples}}}};
}

int run_probe(const json& config, const fs::path& data_dir, const fs::path& checkpoint) {
  const auto manifest = numerics::read_checkpoint_manifest(checkpoint);
  const auto mc = manifest.at("model_config").get<model::ModelConfig>();
  Workspace ws(data_dir, pool_config(config));
  const auto ks = config.at("run").at("probe_k").get<std::vector<size_t>>();
  const auto seed = config.at("run").at("probe_seed").get<uint64_t>();
  const bool dbl = manifest.at("dtype") == "float64";
  const json out = dbl ? probe_with<double>(mc, checkpoint, ws, ks, seed) : probe_with<float>(mc, checkpoint, ws, ks, seed);
  std::cout << out.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
  return 0;
}

int run_export(const fs::path& checkpoint, const std::string& out) {
  const auto manifest = numerics::read_checkpoint_manifest(checkpoint);
  if (out.empty()) {
    std::cout << manifest.dump(2) << '\n';
  } else {
    write_json(out, manifest);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xmodal: unified image-text pre-training at desk scale"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  auto* index = app.add_subcommand("index", "build the vocabulary and retrieval indexes of a dataset");
  auto* augment = app.add_subcommand("augment", "build CMCL groups for every pair");
  auto* train = app.add_subcommand("train", "run pre-training");
  auto* probe = app.add_subcommand("probe", "R@K and greedy-generation probes on the training pairs");
  auto* exportc = app.add_subcommand("export", "print a checkpoint manifest");
  auto* defaults = app.add_subcommand("defaults", "print the default config");

  ConfigOptions synth_cfg, index_cfg, augment_cfg, train_cfg, probe_cfg;
  for (auto [sub, cfg] : {std::pair{synth, &synth_cfg}, std::pair{index, &index_cfg},
                          std::pair{augment, &augment_cfg}, std::pair{train, &train_cfg},
                          std::pair{probe, &probe_cfg}}) {
    cfg->attach(sub);
  }

  std::string out, data_dir, groups, resume, checkpoint;
  uint64_t seed = 1;
  int64_t steps = -1;
  bool quiet = false;

  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--seed", seed, "data seed");

  index->add_option("--data", data_dir, "dataset directory")->required();

  augment->add_option("--data", data_dir, "dataset directory")->required();
  augment->add_option("--out", out, "group file (default <data>/groups.jsonl)");
  augment->add_option("--seed", seed, "augmentation seed");

  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--groups", groups, "group file (default <data>/groups.jsonl)");
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--seed", seed, "run seed")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--steps", steps, "stop after this many total steps (default train.max_steps)");
  train->add_flag("--quiet", quiet, "do not echo the log to stdout");

  probe->add_option("--data", data_dir, "dataset directory")->required();
  probe->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  exportc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exportc->add_option("--out", out, "write the manifest here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  // Log lines go to stderr so stdout stays machine-readable.
  spdlog::set_default_logger(spdlog::stderr_color_mt("xmodal"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*defaults) {
      std::cout << default_config().dump(2) << '\n';
      return 0;
    }
    if (*synth) return run_synth(synth_cfg.resolve(), out, seed);
    if (*index) return run_index(index_cfg.resolve(), data_dir);
    if (*augment) {
      const fs::path file = out.empty() ? fs::path(data_dir) / kGroupsFile : fs::path(out);
      return run_augment(augment_cfg.resolve(), data_dir, file, seed);
    }
    if (*train) {
      const fs::path file = groups.empty() ? fs::path(data_dir) / kGroupsFile : fs::path(groups);
      const auto until = steps >= 0 ? std::optional<int64_t>(steps) : std::nullopt;
      return run_train(train_cfg.resolve(), data_dir, file, out, seed, resume, until, quiet);
    }
    if (*probe) return run_probe(probe_cfg.resolve(), data_dir, checkpoint);
    if (*exportc) return run_export(checkpoint, out);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return kExitUsage;
}
