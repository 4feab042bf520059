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

// Autoregressive decoding: greedy for beam size 1, beam search otherwise.
//
// A hypothesis y_1..y_n scores sum_i log p(y_i | y_<i, x) / n^alpha, where n
// counts the final </s> when present. <pad> and <s> are never emitted.
//
// Beam search keeps the `beam_size` best non-final extensions per step; a
// </s> extension finishes when it ranks within the beam. The search ends when
// no beam is live, or when at least `beam_size` hypotheses have finished and
// none of the live beams, ended at the next step, would score higher.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2tx/model.hpp"
#include "p2tx/pose.hpp"
#include "p2tx/tokenizer.hpp"

namespace p2tx {

struct DecodeConfig {
  std::uint32_t beam_size = 5;
  std::uint32_t max_length = 256;
  double alpha = 1.0;
  // Divides positive (multiplies negative) logits of already emitted tokens.
  // 1.0 disables it.
  double repetition_penalty = 1.0;

  std::vector<std::string> problems() const;
  void validate() const;
};

struct TranslationHypothesis {
  std::vector<std::uint32_t> ids;  // without <s>; ends with </s> unless truncated
  std::string text;
  double log_prob = 0.0;  // sum of token log-probabilities
  double score = 0.0;     // length-normalized
  bool truncated = false; // stopped at max_length without </s>
};

double normalized_score(double log_prob, std::size_t length, double alpha);

// Throws kDimensionMismatch when the feature width differs from the model.
TranslationHypothesis translate(const Parameters<float>& params, const Vocabulary& vocab,
                                const FeatureSequence& source,
                                const DecodeConfig& config = {});

std::vector<TranslationHypothesis> translate_all(const Parameters<float>& params,
                                                 const Vocabulary& vocab,
                                                 const std::vector<FeatureSequence>& sources,
                                                 const DecodeConfig& config = {});

}  // namespace p2tx
