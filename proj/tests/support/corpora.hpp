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

#ifndef XMODAL_TESTS_SUPPORT_CORPORA_HPP_
#define XMODAL_TESTS_SUPPORT_CORPORA_HPP_

#include <string>
#include <vector>

#include "xmodal/numerics/rng.hpp"
#include "xmodal/vision/scene.hpp"

namespace xmodal::testing {

struct SceneCorpus {
  std::vector<vision::SyntheticScene> scenes;
  std::vector<std::string> captions;
};

inline SceneCorpus make_scenes(size_t n, uint64_t seed,
                               const vision::GrammarConfig& grammar = vision::GrammarConfig::desk_default()) {
  numerics::RngState rng(seed);
  SceneCorpus c;
  for (size_t i = 0; i < n; ++i) {
    auto [scene, caption] = vision::generate_synthetic_scene(grammar, rng);
    c.scenes.push_back(std::move(scene));
    c.captions.push_back(std::move(caption));
  }
  return c;
}

// Plain sentences over a wider vocabulary than the caption grammar.
inline std::vector<std::string> make_sentences(size_t n, uint64_t seed) {
  const std::vector<std::string> subj{"the dog", "a child", "my neighbor", "the old man", "a red kite",
                                      "the teacher", "a small boat", "the cat", "our team", "the horse"};
  const std::vector<std::string> verb{"walked", "looked", "waited", "sat", "ran", "played", "slept", "drifted"};
  const std::vector<std::string> place{"near the river", "under a tree", "on the table", "behind the house",
                                       "in the park", "beside a lamp", "at the station", "next to a window",
                                       "in front of the school", "on a wooden chair"};
  const std::vector<std::string> tail{"", " all day", " in the rain", " with a ball", " before dinner",
                                      " and then left", " for an hour"};
  numerics::RngState rng(seed);
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back(subj[rng.uniform_int(subj.size())] + " " + verb[rng.uniform_int(verb.size())] + " " +
                  place[rng.uniform_int(place.size())] + tail[rng.uniform_int(tail.size())]);
  }
  return out;
}

}  // namespace xmodal::testing

#endif  // XMODAL_TESTS_SUPPORT_CORPORA_HPP_
