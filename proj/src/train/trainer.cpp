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

#include "xmodal/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "xmodal/numerics/checkpoint.hpp"

namespace xmodal::train {

using numerics::RngState;
using numerics::Var;

namespace {

// Fork ids of the run seed.
constexpr uint64_t kInitStream = 1;
constexpr uint64_t kMixStream = 2;
constexpr uint64_t kPrepareStream = 3;
constexpr uint64_t kDropoutStream = 4;
constexpr uint64_t kShuffleStream = 5;

// Fork ids of one sample's stream.
constexpr uint64_t kRegionFork = 0;
constexpr uint64_t kCoinFork = 1;
constexpr uint64_t kTextFork = 2;
constexpr uint64_t kFallbackFork = 3;

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

const char* schedule_name(ScheduleKind k) { return k == ScheduleKind::kLinear ? "linear" : "constant"; }

const char* overlap_name(vision::OverlapMode m) {
  switch (m) {
    case vision::OverlapMode::kCandidate:
      return "candidate";
    case vision::OverlapMode::kIoU:
      return "iou";
    case vision::OverlapMode::kMinArea:
      return "min_area";
  }
  return "candidate";
}

vision::OverlapMode overlap_mode(const std::string& s) {
  if (s == "candidate") return vision::OverlapMode::kCandidate;
  if (s == "iou") return vision::OverlapMode::kIoU;
  if (s == "min_area") return vision::OverlapMode::kMinArea;
  throw ConfigError("region_mask.overlap_mode: unknown mode '" + s + "'");
}

}  // namespace

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kImage:
      return "image";
    case Modality::kText:
      return "text";
    case Modality::kPair:
      return "pair";
  }
  return "?";
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  double sum = 0;
  for (double r : ratio) {
    if (!(r >= 0) || !std::isfinite(r)) throw ConfigError("train: ratio components must be finite and >= 0");
    sum += r;
  }
  if (!(sum > 0)) throw ConfigError("train: ratio must have a positive component");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (max_steps <= 0) throw ConfigError("train: max_steps must be positive");
  if (warmup_steps < 0 || warmup_steps >= max_steps) throw ConfigError("train: need 0 <= warmup_steps < max_steps");
  if (!(peak_lr >= 0) || !std::isfinite(peak_lr)) throw ConfigError("train: peak_lr must be finite and >= 0");
  if (!(tau > 0)) throw ConfigError("train: tau must be positive");
  if (!(seq2seq_probability >= 0 && seq2seq_probability <= 1)) {
    throw ConfigError("train: seq2seq_probability must lie in [0, 1]");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {
      {"ratio", c.ratio},
      {"batch_size", c.batch_size},
      {"max_steps", c.max_steps},
      {"warmup_steps", c.warmup_steps},
      {"peak_lr", c.peak_lr},
      {"schedule", schedule_name(c.schedule)},
      {"seed", c.seed},
      {"objectives",
       {{"visual", c.objectives.visual}, {"language", c.objectives.language}, {"cmcl", c.objectives.cmcl}}},
      {"group",
       {{"positives", c.group.positives},
        {"negatives", c.group.negatives},
        {"images", c.group.images},
        {"texts", c.group.texts}}},
      {"tau", c.tau},
      {"fully_individual", c.fully_individual},
      {"share_batch_negatives", c.share_batch_negatives},
      {"seq2seq_probability", c.seq2seq_probability},
      {"masking",
       {{"span_p", c.masking.span_p},
        {"max_span_words", c.masking.max_span_words},
        {"budget", c.masking.budget},
        {"mask_prob", c.masking.mask_prob},
        {"random_prob", c.masking.random_prob}}},
      {"seq2seq",
       {{"min_fragment", c.seq2seq.min_fragment},
        {"max_fragment", c.seq2seq.max_fragment},
        {"budget", c.seq2seq.budget}}},
      {"region_mask",
       {{"anchor_rate", c.region_mask.anchor_rate},
        {"overlap_threshold", c.region_mask.overlap_threshold},
        {"overlap_mode", overlap_name(c.region_mask.mode)}}},
      {"adam",
       {{"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"epsilon", c.adam.epsilon},
        {"weight_decay", c.adam.weight_decay},
        {"clip_norm", c.adam.clip_norm}}},
      {"log_wall_time", c.log_wall_time},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    check_keys(j,
               {"ratio", "batch_size", "max_steps", "warmup_steps", "peak_lr", "schedule", "seed", "objectives",
                "group", "tau", "fully_individual", "share_batch_negatives", "seq2seq_probability", "masking",
                "seq2seq", "region_mask", "adam", "log_wall_time"},
               "train");
    read(j, "ratio", c.ratio);
    read(j, "batch_size", c.batch_size);
    read(j, "max_steps", c.max_steps);
    read(j, "warmup_steps", c.warmup_steps);
    read(j, "peak_lr", c.peak_lr);
    if (j.contains("schedule")) {
      const auto s = j.at("schedule").get<std::string>();
      if (s == "linear") {
        c.schedule = ScheduleKind::kLinear;
      } else if (s == "constant") {
        c.schedule = ScheduleKind::kConstant;
      } else {
        throw ConfigError("train.schedule: unknown kind '" + s + "'");
      }
    }
    read(j, "seed", c.seed);
    if (j.contains("objectives")) {
      const auto& o = j.at("objectives");
      check_keys(o, {"visual", "language", "cmcl"}, "train.objectives");
      read(o, "visual", c.objectives.visual);
      read(o, "language", c.objectives.language);
      read(o, "cmcl", c.objectives.cmcl);
    }
    if (j.contains("group")) {
      const auto& g = j.at("group");
      check_keys(g, {"positives", "negatives", "images", "texts"}, "train.group");
      read(g, "positives", c.group.positives);
      read(g, "negatives", c.group.negatives);
      read(g, "images", c.group.images);
      read(g, "texts", c.group.texts);
    }
    read(j, "tau", c.tau);
    read(j, "fully_individual", c.fully_individual);
    read(j, "share_batch_negatives", c.share_batch_negatives);
    read(j, "seq2seq_probability", c.seq2seq_probability);
    if (j.contains("masking")) {
      const auto& m = j.at("masking");
      check_keys(m, {"span_p", "max_span_words", "budget", "mask_prob", "random_prob"}, "train.masking");
      read(m, "span_p", c.masking.span_p);
      read(m, "max_span_words", c.masking.max_span_words);
      read(m, "budget", c.masking.budget);
      read(m, "mask_prob", c.masking.mask_prob);
      read(m, "random_prob", c.masking.random_prob);
    }
    if (j.contains("seq2seq")) {
      const auto& s = j.at("seq2seq");
      check_keys(s, {"min_fragment", "max_fragment", "budget"}, "train.seq2seq");
      read(s, "min_fragment", c.seq2seq.min_fragment);
      read(s, "max_fragment", c.seq2seq.max_fragment);
      read(s, "budget", c.seq2seq.budget);
    }
    if (j.contains("region_mask")) {
      const auto& r = j.at("region_mask");
      check_keys(r, {"anchor_rate", "overlap_threshold", "overlap_mode"}, "train.region_mask");
      read(r, "anchor_rate", c.region_mask.anchor_rate);
      read(r, "overlap_threshold", c.region_mask.overlap_threshold);
      if (r.contains("overlap_mode")) c.region_mask.mode = overlap_mode(r.at("overlap_mode").get<std::string>());
    }
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      check_keys(a, {"beta1", "beta2", "epsilon", "weight_decay", "clip_norm"}, "train.adam");
      read(a, "beta1", c.adam.beta1);
      read(a, "beta2", c.adam.beta2);
      read(a, "epsilon", c.adam.epsilon);
      read(a, "weight_decay", c.adam.weight_decay);
      read(a, "clip_norm", c.adam.clip_norm);
    }
    read(j, "log_wall_time", c.log_wall_time);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

double lr_at(int64_t step, const TrainConfig& c) {
  if (step < 0 || step > c.max_steps) throw ContractError("lr_at: step outside [0, max_steps]");
  if (step < c.warmup_steps) {
    return c.peak_lr * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
  }
  if (c.schedule == ScheduleKind::kConstant) return c.peak_lr;
  return c.peak_lr * static_cast<double>(c.max_steps - step) / static_cast<double>(c.max_steps - c.warmup_steps);
}

// ---------------------------------------------------------------- mixing

void to_json(nlohmann::json& j, const MixerState& s) {
  j = {{"batches", s.batches}, {"cursor", s.cursor}, {"epoch", s.epoch}};
}

void from_json(const nlohmann::json& j, MixerState& s) {
  s.batches = j.at("batches").get<int64_t>();
  s.cursor = j.at("cursor").get<std::array<uint64_t, 3>>();
  s.epoch = j.at("epoch").get<std::array<uint64_t, 3>>();
}

BatchMixer::BatchMixer(std::array<size_t, 3> stream_sizes, std::array<double, 3> ratio, size_t batch_size,
                       uint64_t seed)
    : sizes_(stream_sizes), batch_size_(batch_size), seed_(seed) {
  double sum = 0;
  for (double r : ratio) {
    if (!(r >= 0) || !std::isfinite(r)) throw ConfigError("mix_batches: ratio components must be finite and >= 0");
    sum += r;
  }
  if (!(sum > 0)) throw ConfigError("mix_batches: ratio must have a positive component");
  if (batch_size == 0) throw ConfigError("mix_batches: batch size must be positive");
  for (size_t s = 0; s < 3; ++s) {
    weights_[s] = ratio[s] / sum;
    if (weights_[s] > 0 && sizes_[s] == 0) {
      throw ConfigError(std::string("mix_batches: ") + modality_name(static_cast<Modality>(s)) +
                        " stream is empty but its ratio is positive");
    }
  }
}

const std::vector<uint32_t>& BatchMixer::permutation(size_t s) {
  if (perms_[s].size() != sizes_[s] || perm_epoch_[s] != state_.epoch[s]) {
    perms_[s].resize(sizes_[s]);
    std::iota(perms_[s].begin(), perms_[s].end(), 0u);
    RngState rng = RngState(seed_).fork(kShuffleStream).fork(s).fork(state_.epoch[s]);
    rng.shuffle(perms_[s]);
    perm_epoch_[s] = state_.epoch[s];
  }
  return perms_[s];
}

BatchPlan BatchMixer::next() {
  BatchPlan plan;
  plan.step = ++state_.batches;
  RngState rng = RngState(seed_).fork(kMixStream).fork(static_cast<uint64_t>(plan.step));
  for (size_t i = 0; i < batch_size_; ++i) {
    const size_t s = rng.categorical(weights_);
    const uint32_t index = permutation(s)[state_.cursor[s]];
    if (++state_.cursor[s] == sizes_[s]) {
      state_.cursor[s] = 0;
      ++state_.epoch[s];
    }
    plan.samples.push_back({static_cast<Modality>(s), index});
  }
  return plan;
}

void BatchMixer::restore(const MixerState& state) {
  for (size_t s = 0; s < 3; ++s) {
    if (state.cursor[s] != 0 && state.cursor[s] >= sizes_[s]) {
      throw ConfigError("mix_batches: restored cursor beyond its stream");
    }
  }
  state_ = state;
}

std::vector<BatchPlan> mix_batches(std::array<size_t, 3> stream_sizes, std::array<double, 3> ratio,
                                   size_t batch_size, uint64_t seed, size_t count) {
  BatchMixer mixer(stream_sizes, ratio, batch_size, seed);
  std::vector<BatchPlan> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(mixer.next());
  return out;
}

// ---------------------------------------------------------------- data

TrainData::TrainData(const DataResources& resources, const std::vector<augment::CmclGroup>& groups)
    : resources_(&resources) {
  const auto& tok = resources.tokenizer();
  const auto& data = resources.data();
  auto track = [&](const std::vector<int32_t>& ids) { max_tokens_ = std::max(max_tokens_, ids.size()); };
  for (const auto& t : data.texts) {
    texts_.push_back(tok.encode(t));
    track(texts_.back().ids);
  }
  for (const auto& p : data.pairs) {
    captions_.push_back(tok.encode(p.caption));
    track(captions_.back().ids);
  }
  groups_.resize(data.pairs.size());
  for (const auto& g : groups) {
    if (g.pair_id >= data.pairs.size()) {
      throw InputError("train data: group for unknown pair " + std::to_string(g.pair_id));
    }
    auto& slot = groups_[g.pair_id];
    if (slot) throw InputError("train data: two groups for pair " + std::to_string(g.pair_id));
    TokenizedGroup t;
    for (const auto& s : g.positives) t.positives.push_back(tok.encode(s).ids);
    for (const auto& s : g.negatives) t.negatives.push_back(tok.encode(s).ids);
    for (uint32_t id : g.images) {
      if (id >= resources.image_pool().size()) throw InputError("train data: group image outside the pool");
      t.images.push_back(resources.image_pool()[id]);
    }
    for (uint32_t id : g.texts) {
      if (id >= resources.text_pool_tokens().size()) throw InputError("train data: group text outside the pool");
      t.texts.push_back(resources.text_pool_tokens()[id]);
    }
    for (const auto* family : {&t.positives, &t.negatives, &t.texts}) {
      for (const auto& ids : *family) track(ids);
    }
    slot = std::move(t);
  }
}

std::array<size_t, 3> TrainData::stream_sizes() const {
  return {resources_->data().images.size(), texts_.size(), captions_.size()};
}

const TokenizedGroup* TrainData::group(uint32_t pair) const {
  const auto& g = groups_.at(pair);
  return g ? &*g : nullptr;
}

std::string TrainData::sample_id(const SampleRef& ref) const {
  switch (ref.modality) {
    case Modality::kImage:
      return resources_->data().images.at(ref.index).id;
    case Modality::kText:
      return "text" + std::to_string(ref.index);
    case Modality::kPair:
      return resources_->data().pairs.at(ref.index).id;
  }
  return "?";
}

// ---------------------------------------------------------------- log

std::string format_record(const TrainRecord& r, bool with_wall_time) {
  nlohmann::ordered_json j = {
      {"step", r.step},
      {"lr", r.lr},
      {"v_loss", r.v_loss},
      {"l_loss", r.l_loss},
      {"cmcl_loss", r.cmcl_loss},
      {"total", r.total},
      {"grad_norm", r.grad_norm},
      {"images", r.counts[0]},
      {"texts", r.counts[1]},
      {"pairs", r.counts[2]},
  };
  if (with_wall_time) j["wall_time"] = r.wall_time;
  return j.dump();
}

TrainRecord parse_record(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TrainRecord r;
    r.step = j.at("step").get<int64_t>();
    r.lr = j.at("lr").get<double>();
    r.v_loss = j.at("v_loss").get<double>();
    r.l_loss = j.at("l_loss").get<double>();
    r.cmcl_loss = j.at("cmcl_loss").get<double>();
    r.total = j.at("total").get<double>();
    r.grad_norm = j.value("grad_norm", 0.0);
    r.counts = {j.value("images", size_t{0}), j.value("texts", size_t{0}), j.value("pairs", size_t{0})};
    r.wall_time = j.value("wall_time", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train log: ") + e.what());
  }
}

TrainLog::TrainLog(const std::filesystem::path& path, bool with_wall_time, bool append, std::ostream* echo)
    : file_(path, append ? std::ios::app : std::ios::trunc), wall_(with_wall_time), echo_(echo) {
  if (!file_) throw InputError("train log: cannot open " + path.string());
}

void TrainLog::write(const TrainRecord& r) {
  const std::string line = format_record(r, wall_);
  file_ << line << '\n';
  file_.flush();
  if (echo_ != nullptr) *echo_ << line << '\n';
}

std::vector<TrainRecord> read_train_log(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("train log: cannot open " + path.string());
  std::vector<TrainRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) out.push_back(parse_record(line));
  }
  return out;
}

// ---------------------------------------------------------------- trainer

template <typename T>
std::optional<Var<T>> LossParts<T>::total_var() const {
  std::optional<Var<T>> out;
  for (const auto* part : {&visual, &language, &cmcl}) {
    if (!*part) continue;
    out = out ? numerics::add(*out, **part) : **part;
  }
  return out;
}

namespace {

uint64_t model_seed(uint64_t seed) {
  RngState rng = RngState(seed).fork(kInitStream);
  return rng.next_u64();
}

}  // namespace

template <typename T>
Trainer<T>::Trainer(const TrainData& data, model::ModelConfig model_config, TrainConfig train_config)
    : data_(&data),
      model_config_(std::move(model_config)),
      train_config_(std::move(train_config)),
      model_((train_config_.validate(), model_config_), model_seed(train_config_.seed)),
      adam_(train_config_.adam),
      mixer_(data.stream_sizes(), train_config_.ratio, train_config_.batch_size, train_config_.seed) {
  const auto& mc = model_config_;
  if (data.max_token_length() > mc.max_text_len) {
    throw ConfigError("train: a tokenized text is longer than model max_text_len");
  }
  if (data.resources().vocabulary().size() > mc.vocab_size) {
    throw ConfigError("train: tokenizer vocabulary exceeds model vocab_size");
  }
  auto check_regions = [&](const vision::RegionSet& r, const std::string& id) {
    if (r.size() > mc.max_regions || (!r.empty() && (r.feature_dim() != mc.feature_dim ||
                                                     r.num_classes() != mc.num_classes))) {
      throw ConfigError("train: regions of '" + id + "' do not fit the model config");
    }
  };
  for (const auto& s : data.resources().data().images) check_regions(s.regions, s.id);
  for (const auto& s : data.resources().data().pairs) check_regions(s.regions, s.id);
  if (train_config_.objectives.cmcl && train_config_.ratio[2] > 0) {
    for (uint32_t i = 0; i < data.stream_sizes()[2]; ++i) {
      if (data.group(i) == nullptr) {
        throw ConfigError("train: pair '" + data.sample_id({Modality::kPair, i}) + "' has no CMCL group");
      }
    }
  }
}

template <typename T>
PreparedBatch Trainer<T>::prepare(const BatchPlan& plan) const {
  const auto& mc = model_config_;
  const auto& tc = train_config_;
  const RngState step_rng = RngState(tc.seed).fork(kPrepareStream).fork(static_cast<uint64_t>(plan.step));
  const size_t vocab = data_->resources().vocabulary().size();
  PreparedBatch batch;
  batch.step = plan.step;

  // Fills pack and token targets for a text with optional (masked) regions.
  auto language = [&](const text::TokenSequence& seq, const vision::RegionSet* regions, RngState& rng,
                      PreparedSample& s) {
    const bool want_seq2seq = rng.fork(kCoinFork).bernoulli(tc.seq2seq_probability);
    if (want_seq2seq) {
      RngState r = rng.fork(kTextFork);
      if (auto split = text::sample_seq2seq_split(seq, r, tc.seq2seq)) {
        const auto source = regions != nullptr ? model::assemble_pair(*regions, split->source, mc)
                                               : model::assemble_single_text(split->source, mc);
        s.pack = model::append_target(source, split->target, mc);
        s.token_targets = objectives::seq2seq_targets(s.pack, *split);
        s.seq2seq = true;
        return;
      }
    }
    // Bidirectional, also the fallback for texts too short to split.
    RngState r = rng.fork(want_seq2seq ? kFallbackFork : kTextFork);
    const auto mask = text::sample_bidirectional_mask(seq, vocab, r, tc.masking);
    const auto ids = mask.apply(seq.ids);
    s.pack = regions != nullptr ? model::assemble_pair(*regions, ids, mc) : model::assemble_single_text(ids, mc);
    s.token_targets = objectives::bidirectional_targets(s.pack, mask);
  };

  for (size_t i = 0; i < plan.samples.size(); ++i) {
    const SampleRef ref = plan.samples[i];
    RngState rng = step_rng.fork(i);
    PreparedSample s;
    s.ref = ref;
    s.id = data_->sample_id(ref);
    switch (ref.modality) {
      case Modality::kImage: {
        const auto& regions = data_->image(ref.index);
        RngState r = rng.fork(kRegionFork);
        s.region_plan = vision::sample_region_mask(regions, r, tc.region_mask);
        s.pack = model::assemble_single_image(s.region_plan.apply(regions), mc);
        break;
      }
      case Modality::kText:
        language(data_->text(ref.index), nullptr, rng, s);
        break;
      case Modality::kPair: {
        const auto& regions = data_->pair_image(ref.index);
        RngState r = rng.fork(kRegionFork);
        s.region_plan = vision::sample_region_mask(regions, r, tc.region_mask);
        const auto masked = s.region_plan.apply(regions);
        language(data_->caption(ref.index), &masked, rng, s);
        if (tc.objectives.cmcl) {
          const TokenizedGroup* g = data_->group(ref.index);
          if (g == nullptr) throw ContractError("prepare: pair '" + s.id + "' has no CMCL group");
          objectives::CmclExample ex;
          ex.image = &regions;
          ex.text = data_->caption(ref.index).ids;
          auto take = [](const auto& from, size_t n) {
            return std::decay_t<decltype(from)>(from.begin(), from.begin() + std::min(n, from.size()));
          };
          ex.positives = take(g->positives, tc.group.positives);
          ex.negatives = take(g->negatives, tc.group.negatives);
          ex.images = take(g->images, tc.group.images);
          ex.texts = take(g->texts, tc.group.texts);
          batch.groups.push_back(std::move(ex));
          batch.group_sample.push_back(i);
        }
        break;
      }
    }
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

template <typename T>
LossParts<T> Trainer<T>::compute_losses(const PreparedBatch& batch, RngState* dropout_rng) {
  const auto& tc = train_config_;
  LossParts<T> parts;
  std::vector<const model::InputPack*> ptrs;
  for (const auto& s : batch.samples) ptrs.push_back(&s.pack);
  if (ptrs.empty()) return parts;
  const auto enc = model_.forward(ptrs, dropout_rng);

  std::vector<size_t> region_rows, token_rows;
  std::vector<std::vector<double>> features, dists;
  std::vector<int32_t> targets;
  for (size_t i = 0; i < batch.samples.size(); ++i) {
    const auto& s = batch.samples[i];
    for (size_t k = 0; k < s.region_plan.masked.size(); ++k) {
      region_rows.push_back(enc.layout.row(i, s.pack.region_slot(s.region_plan.masked[k])));
      features.push_back(s.region_plan.target_features[k]);
      dists.push_back(s.region_plan.target_dist[k]);
    }
    for (size_t k = 0; k < s.token_targets.slots.size(); ++k) {
      token_rows.push_back(enc.layout.row(i, s.token_targets.slots[k]));
      targets.push_back(s.token_targets.targets[k]);
    }
  }
  if (tc.objectives.visual && !region_rows.empty()) {
    parts.visual = objectives::visual_loss_rows(model_, enc.rows(region_rows), features, dists);
    parts.v_loss = static_cast<double>(parts.visual->value()[0]);
  }
  if (tc.objectives.language && !token_rows.empty()) {
    parts.language = objectives::token_nll_rows(model_, enc.rows(token_rows), targets);
    parts.l_loss = static_cast<double>(parts.language->value()[0]);
  }
  if (tc.objectives.cmcl && !batch.groups.empty()) {
    const auto scores = objectives::score_cmcl_group(model_, std::span<const objectives::CmclExample>(batch.groups),
                                                     {tc.tau, tc.fully_individual, tc.share_batch_negatives}, dropout_rng);
    Var<T> acc = objectives::cmcl_loss(scores[0]);
    for (size_t g = 1; g < scores.size(); ++g) acc = numerics::add(acc, objectives::cmcl_loss(scores[g]));
    parts.cmcl = numerics::scale(acc, static_cast<T>(1.0 / static_cast<double>(scores.size())));
    parts.cmcl_loss = static_cast<double>(parts.cmcl->value()[0]);
  }
  return parts;
}

template <typename T>
void Trainer<T>::diverged(const PreparedBatch& batch, const std::string& cause) {
  std::string culprit;
  nlohmann::json per_sample = nlohmann::json::array();
  for (size_t i = 0; i < batch.samples.size(); ++i) {
    PreparedBatch one;
    one.step = batch.step;
    one.samples.push_back(batch.samples[i]);
    for (size_t g = 0; g < batch.group_sample.size(); ++g) {
      if (batch.group_sample[g] == i) {
        one.groups.push_back(batch.groups[g]);
        one.group_sample.push_back(0);
      }
    }
    std::string status = "finite";
    try {
      const auto parts = compute_losses(one, nullptr);
      if (!std::isfinite(parts.total())) status = "non-finite loss";
    } catch (const NumericError& e) {
      status = e.what();
    }
    per_sample.push_back({{"sample", batch.samples[i].id}, {"status", status}});
    if (culprit.empty() && status != "finite") culprit = batch.samples[i].id;
  }
  model_.params().zero_grad();
  nlohmann::json dump = {{"step", batch.step}, {"cause", cause}, {"sample", culprit}, {"samples", per_sample}};
  throw TrainingDiverged("train: non-finite loss at step " + std::to_string(batch.step) + " (sample '" +
                             (culprit.empty() ? std::string("unknown") : culprit) + "'): " + cause,
                         culprit, std::move(dump));
}

template <typename T>
TrainRecord Trainer<T>::step() {
  const auto start = std::chrono::steady_clock::now();
  if (steps_done() >= train_config_.max_steps) throw ContractError("train: max_steps reached");
  const BatchPlan plan = mixer_.next();
  const PreparedBatch batch = prepare(plan);
  RngState dropout = RngState(train_config_.seed).fork(kDropoutStream).fork(static_cast<uint64_t>(plan.step));

  model_.params().zero_grad();
  LossParts<T> parts;
  try {
    parts = compute_losses(batch, &dropout);
  } catch (const NumericError& e) {
    diverged(batch, e.what());
  }
  if (!std::isfinite(parts.total())) diverged(batch, "non-finite loss");

  TrainRecord r;
  r.step = plan.step;
  r.lr = lr_at(plan.step, train_config_);
  r.v_loss = parts.v_loss;
  r.l_loss = parts.l_loss;
  r.cmcl_loss = parts.cmcl_loss;
  r.total = parts.total();
  for (const auto& s : plan.samples) ++r.counts[static_cast<size_t>(s.modality)];
  if (auto total = parts.total_var()) {
    numerics::backward(*total);
    r.grad_norm = adam_.step(model_.params(), r.lr);
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

template <typename T>
void Trainer<T>::save(const std::filesystem::path& path) const {
  numerics::CheckpointState st;
  st.model_config = model_config_;
  st.train_config = train_config_;
  st.step = steps_done();
  st.seed = train_config_.seed;
  st.optimizer_steps = adam_.steps_taken();
  st.trainer_state = {{"mixer", mixer_.state()}};
  numerics::save_checkpoint(path, model_.params(), st);
}

namespace {

nlohmann::json comparable_train_config(nlohmann::json j) {
  j.erase("log_wall_time");
  return j;
}

}  // namespace

template <typename T>
void Trainer<T>::resume(const std::filesystem::path& path) {
  const auto manifest = numerics::read_checkpoint_manifest(path);
  if (manifest.at("model_config") != nlohmann::json(model_config_)) {
    throw ConfigError("resume: checkpoint model config differs from this run");
  }
  if (comparable_train_config(manifest.at("train_config")) !=
      comparable_train_config(nlohmann::json(train_config_))) {
    throw ConfigError("resume: checkpoint train config differs from this run");
  }
  const auto st = numerics::load_checkpoint(path, model_.params());
  adam_.set_steps_taken(st.optimizer_steps);
  if (!st.trainer_state.contains("mixer")) throw FormatError("resume: checkpoint carries no mixer state");
  mixer_.restore(st.trainer_state.at("mixer").template get<MixerState>());
  if (steps_done() != st.step) throw FormatError("resume: mixer state disagrees with the stored step");
}

template struct LossParts<float>;
template struct LossParts<double>;
template class Trainer<float>;
template class Trainer<double>;

}  // namespace xmodal::train
