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

#ifndef XMODAL_TRAIN_TRAINER_HPP_
#define XMODAL_TRAIN_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/model/transformer.hpp"
#include "xmodal/numerics/adam.hpp"
#include "xmodal/objectives/losses.hpp"
#include "xmodal/text/masking.hpp"
#include "xmodal/train/dataset.hpp"
#include "xmodal/vision/regions.hpp"

namespace xmodal::train {

// Stream order everywhere: images, texts, pairs.
enum class Modality : uint8_t { kImage = 0, kText = 1, kPair = 2 };
const char* modality_name(Modality m);

enum class ScheduleKind { kLinear, kConstant };

struct ObjectiveToggles {
  bool visual = true;
  bool language = true;
  bool cmcl = true;
};

// Per-group caps on the serialized families: positives, negatives, retrieved
// images, retrieved texts.
struct GroupCounts {
  size_t positives = 3;
  size_t negatives = 8;
  size_t images = 4;
  size_t texts = 4;
};

struct TrainConfig {
  // images : texts : pairs
  std::array<double, 3> ratio{1.0, 1.0, 5.0};
  size_t batch_size = 8;
  int64_t max_steps = 2000;
  int64_t warmup_steps = 100;
  double peak_lr = 1e-3;
  ScheduleKind schedule = ScheduleKind::kLinear;
  uint64_t seed = 0;
  ObjectiveToggles objectives;
  GroupCounts group;
  double tau = 0.1;
  bool fully_individual = false;
  // See objectives::CmclConfig::share_batch_negatives.
  bool share_batch_negatives = false;
  // Probability that a text (or caption) gets the seq2seq objective.
  double seq2seq_probability = 0.5;
  text::MaskingConfig masking;
  text::Seq2SeqConfig seq2seq;
  vision::RegionMaskConfig region_mask;
  numerics::AdamConfig adam;
  // Off makes log files byte-comparable across runs.
  bool log_wall_time = true;

  // Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are a ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

// Linear warmup 0 -> peak over warmup_steps, then linear decay to 0 at
// max_steps (kLinear) or constant peak (kConstant). Throws ContractError
// outside [0, max_steps].
double lr_at(int64_t step, const TrainConfig& config);

struct SampleRef {
  Modality modality = Modality::kPair;
  uint32_t index = 0;
  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

struct BatchPlan {
  int64_t step = 0;
  std::vector<SampleRef> samples;
  friend bool operator==(const BatchPlan&, const BatchPlan&) = default;
};

struct MixerState {
  // Batches handed out so far.
  int64_t batches = 0;
  std::array<uint64_t, 3> cursor{};
  std::array<uint64_t, 3> epoch{};
  friend bool operator==(const MixerState&, const MixerState&) = default;
};

void to_json(nlohmann::json& j, const MixerState& s);
void from_json(const nlohmann::json& j, MixerState& s);

// Draws each slot's modality i.i.d. with probability proportional to the
// ratio; each stream walks its own permutation, reshuffled every epoch.
// Everything is a function of (seed, state), so a restored mixer continues
// the exact sequence.
class BatchMixer {
 public:
  // Throws ConfigError for a bad ratio or an empty stream with positive
  // weight.
  BatchMixer(std::array<size_t, 3> stream_sizes, std::array<double, 3> ratio, size_t batch_size, uint64_t seed);

  BatchPlan next();
  const MixerState& state() const { return state_; }
  void restore(const MixerState& state);

 private:
  const std::vector<uint32_t>& permutation(size_t stream);

  std::array<size_t, 3> sizes_;
  std::array<double, 3> weights_;
  size_t batch_size_;
  uint64_t seed_;
  MixerState state_;
  std::array<std::vector<uint32_t>, 3> perms_;
  std::array<uint64_t, 3> perm_epoch_{};
};

std::vector<BatchPlan> mix_batches(std::array<size_t, 3> stream_sizes, std::array<double, 3> ratio,
                                   size_t batch_size, uint64_t seed, size_t count);

// Tokenized CMCL material of one pair.
struct TokenizedGroup {
  std::vector<std::vector<int32_t>> positives;
  std::vector<std::vector<int32_t>> negatives;
  std::vector<const vision::RegionSet*> images;
  std::vector<std::vector<int32_t>> texts;
};

// Training view of a dataset: tokenized texts and captions plus groups keyed
// by pair. Holds pointers into `resources`, which must outlive it.
class TrainData {
 public:
  TrainData(const DataResources& resources, const std::vector<augment::CmclGroup>& groups);

  std::array<size_t, 3> stream_sizes() const;
  const vision::RegionSet& image(uint32_t i) const { return resources_->data().images.at(i).regions; }
  const text::TokenSequence& text(uint32_t i) const { return texts_.at(i); }
  const vision::RegionSet& pair_image(uint32_t i) const { return resources_->data().pairs.at(i).regions; }
  const text::TokenSequence& caption(uint32_t i) const { return captions_.at(i); }
  // nullptr when the pair has no group.
  const TokenizedGroup* group(uint32_t pair) const;
  std::string sample_id(const SampleRef& ref) const;
  const DataResources& resources() const { return *resources_; }
  size_t max_token_length() const { return max_tokens_; }

 private:
  const DataResources* resources_;
  std::vector<text::TokenSequence> texts_;
  std::vector<text::TokenSequence> captions_;
  std::vector<std::optional<TokenizedGroup>> groups_;
  size_t max_tokens_ = 0;
};

// One sample with its inputs and chosen objectives.
struct PreparedSample {
  SampleRef ref;
  std::string id;
  model::InputPack pack;
  vision::RegionMaskPlan region_plan;
  // Empty for images.
  objectives::TokenTargets token_targets;
  bool seq2seq = false;
};

struct PreparedBatch {
  int64_t step = 0;
  std::vector<PreparedSample> samples;
  std::vector<objectives::CmclExample> groups;
  // Index into samples of the pair each group belongs to.
  std::vector<size_t> group_sample;
};

template <typename T>
struct LossParts {
  std::optional<numerics::Var<T>> visual, language, cmcl;
  double v_loss = 0, l_loss = 0, cmcl_loss = 0;

  double total() const { return v_loss + l_loss + cmcl_loss; }
  // Sum of the active parts; nullopt when none contributed.
  std::optional<numerics::Var<T>> total_var() const;
};

struct TrainRecord {
  int64_t step = 0;
  double lr = 0;
  double v_loss = 0;
  double l_loss = 0;
  double cmcl_loss = 0;
  double total = 0;
  double wall_time = 0;
  double grad_norm = 0;
  std::array<size_t, 3> counts{};
};

// One JSON object per line; floating-point fields carry 17 significant
// digits. wall_time is omitted when `with_wall_time` is false.
std::string format_record(const TrainRecord& r, bool with_wall_time);
TrainRecord parse_record(const std::string& line);

class TrainLog {
 public:
  // Appends to `path` (truncating unless `append`); mirrors lines to `echo`.
  TrainLog(const std::filesystem::path& path, bool with_wall_time, bool append = false, std::ostream* echo = nullptr);
  void write(const TrainRecord& r);

 private:
  std::ofstream file_;
  bool wall_;
  std::ostream* echo_;
};

std::vector<TrainRecord> read_train_log(const std::filesystem::path& path);

// Raised when a step produces a non-finite loss.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::string sample_id, nlohmann::json dump)
      : NumericError(what), sample_id_(std::move(sample_id)), dump_(std::move(dump)) {}
  const std::string& sample_id() const { return sample_id_; }
  const nlohmann::json& dump() const { return dump_; }

 private:
  std::string sample_id_;
  nlohmann::json dump_;
};

template <typename T>
class Trainer {
 public:
  // Parameters are initialized from the seed; throws ConfigError for
  // inconsistent configs or a pair without a group while CMCL is on.
  Trainer(const TrainData& data, model::ModelConfig model_config, TrainConfig train_config);

  // Runs the next batch: losses, backward, clipping and the Adam update at
  // lr_at(step). Throws TrainingDiverged on a non-finite loss.
  TrainRecord step();

  // Pieces of step(), exposed for inspection.
  PreparedBatch prepare(const BatchPlan& plan) const;
  LossParts<T> compute_losses(const PreparedBatch& batch, numerics::RngState* dropout_rng);

  int64_t steps_done() const { return mixer_.state().batches; }
  const TrainConfig& config() const { return train_config_; }
  model::Model<T>& model() { return model_; }
  const BatchMixer& mixer() const { return mixer_; }
  const numerics::Adam<T>& optimizer() const { return adam_; }

  void save(const std::filesystem::path& path) const;
  // Restores parameters, moments, optimizer and mixer state. Throws
  // ConfigError when the stored configs differ from this trainer's.
  void resume(const std::filesystem::path& path);

 private:
  [[noreturn]] void diverged(const PreparedBatch& batch, const std::string& cause);

  const TrainData* data_;
  model::ModelConfig model_config_;
  TrainConfig train_config_;
  model::Model<T> model_;
  numerics::Adam<T> adam_;
  BatchMixer mixer_;
};

// Recall@K of individually encoded (image, caption) pairs in both directions.
struct ProbePair {
  const vision::RegionSet* image = nullptr;
  std::vector<int32_t> caption;
};

struct RetrievalProbe {
  std::vector<size_t> ks;
  // Parallel to ks.
  std::vector<double> image_to_text;
  std::vector<double> text_to_image;
  // scores[i][j] = cos(h_img of image i, h_cls of caption j).
  std::vector<std::vector<double>> scores;
};

// Ties rank the lower index first. Throws ContractError for fewer than 2
// pairs.
RetrievalProbe recall_at_k(std::vector<std::vector<double>> scores, std::vector<size_t> ks);

template <typename T>
RetrievalProbe probe_retrieval(model::Model<T>& model, std::span<const ProbePair> pairs, std::vector<size_t> ks);

struct GenerationSample {
  std::vector<int32_t> source;
  std::vector<int32_t> target;
  std::vector<int32_t> generated;
  size_t matched = 0;
};

struct GenerationProbe {
  size_t matched = 0;
  size_t total = 0;
  std::vector<GenerationSample> samples;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total); }
};

// For each caption a seq2seq split drawn from RngState(seed).fork(i); the
// model regenerates target[1..] greedily from (image, source) and is scored
// position by position. Captions too short to split are skipped.
template <typename T>
GenerationProbe probe_generation(model::Model<T>& model, std::span<const vision::RegionSet* const> images,
                                 std::span<const text::TokenSequence> captions, uint64_t seed,
                                 const text::Seq2SeqConfig& config = {});

}  // namespace xmodal::train

#endif  // XMODAL_TRAIN_TRAINER_HPP_
