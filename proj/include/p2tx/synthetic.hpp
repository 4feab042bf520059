// Copyright 2026 The p2tx Authors
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

// Seeded pose/text parallel corpora for tests and desk-scale runs.
//
// Templates are plain sentences with alternation slots, e.g.
// "{der|ein} Hund {läuft|schläft}". A sample picks a template and fills each
// slot uniformly. Its pose splits the frames evenly across the words; within
// a word's segment every (keypoint, coordinate) track is
//   0.5 + sum_j a_j * sin(2*pi*f_j*u + phi_j),   u in [0, 1)
// with 2 or 3 terms whose amplitudes, frequencies and phases depend only on
// the word. Gaussian jitter is added from the corpus seed and the result is
// clamped to [0, 1].

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "p2tx/pose.hpp"
#include "p2tx/rng.hpp"

namespace p2tx {

struct SynthSpec {
  std::uint32_t pairs = 32;
  std::uint32_t min_frames = 24;
  std::uint32_t max_frames = 40;
  std::uint32_t keypoints = 8;
  std::uint32_t dims = 3;
  FrameRate fps{25, 1};
  std::vector<std::string> templates;
  std::uint64_t seed = 0;
  double jitter = 0.005;

  std::vector<std::string> problems() const;
  void validate() const;  // throws kInvalidArgument listing problems()
};

// A small German inventory used when a spec lists no templates.
std::vector<std::string> default_templates();

// Throws kInvalidArgument on unbalanced braces or empty alternatives.
std::string fill_template(std::string_view tmpl, Rng& rng);

// Words of every alternative and literal, sorted and unique. Assumes slots
// sit on word boundaries.
std::vector<std::string> template_vocabulary(const std::vector<std::string>& templates);

struct SynthCorpus {
  std::vector<PoseSequence> poses;
  std::vector<std::string> sentences;
};

SynthCorpus generate(const SynthSpec& spec);

// Noise-free pose for one sentence. Frame count is a function of the
// sentence, in [min_frames, max_frames].
PoseSequence synthesize_pose(const SynthSpec& spec, std::string_view sentence);

// body / left-hand / right-hand split used by the generator.
std::vector<ComponentRange> synthetic_components(std::uint32_t keypoints);

}  // namespace p2tx
