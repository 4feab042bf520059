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

#include "p2tx/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "p2tx/error.hpp"

namespace p2tx {
namespace {

struct Beam {
  std::vector<std::uint32_t> ids;
  double log_prob = 0.0;
  DecoderState<float> state;
  Matrix<float> next_logits;  // 1 x V for the position after ids
};

struct Candidate {
  std::size_t beam;
  std::uint32_t token;
  double log_prob;
};

std::vector<double> log_softmax(const Matrix<float>& logits,
                                const std::vector<std::uint32_t>& history, double penalty) {
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(logits(0, i));
  if (penalty != 1.0) {
    std::vector<bool> seen(out.size(), false);
    for (auto id : history) seen[id] = true;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (seen[i]) out[i] = out[i] > 0.0 ? out[i] / penalty : out[i] * penalty;
  }
  const double max = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - max);
  const double log_z = max + std::log(sum);
  for (double& v : out) v -= log_z;
  return out;
}

bool emittable(std::uint32_t id) { return id != kPadId && id != kBosId; }

TranslationHypothesis finish(const Vocabulary& vocab, std::vector<std::uint32_t> ids,
                             double log_prob, bool truncated, double alpha) {
  TranslationHypothesis h;
  h.score = normalized_score(log_prob, ids.size(), alpha);
  h.text = decode(vocab, TokenSequence{ids});
  h.ids = std::move(ids);
  h.log_prob = log_prob;
  h.truncated = truncated;
  return h;
}

TranslationHypothesis greedy(const Parameters<float>& params, const Vocabulary& vocab,
                             DecoderState<float> state, const DecodeConfig& config) {
  std::vector<std::uint32_t> ids;
  double log_prob = 0.0;
  Matrix<float> logits = decode_step(params, state, kBosId);
  while (ids.size() < config.max_length) {
    const auto lp = log_softmax(logits, ids, config.repetition_penalty);
    // </s> is the lowest emittable id; strict '>' keeps the lowest id on ties.
    std::uint32_t best = kEosId;
    for (std::uint32_t id = 0; id < lp.size(); ++id) {
      if (!emittable(id)) continue;
      if (lp[id] > lp[best]) best = id;
    }
    ids.push_back(best);
    log_prob += lp[best];
    if (best == kEosId) return finish(vocab, std::move(ids), log_prob, false, config.alpha);
    if (ids.size() < config.max_length) logits = decode_step(params, state, best);
  }
  return finish(vocab, std::move(ids), log_prob, true, config.alpha);
}

TranslationHypothesis beam_search(const Parameters<float>& params, const Vocabulary& vocab,
                                  DecoderState<float> state, const DecodeConfig& config) {
  const std::size_t width = config.beam_size;
  std::vector<Beam> live;
  {
    Beam root;
    root.next_logits = decode_step(params, state, kBosId);
    root.state = std::move(state);
    live.push_back(std::move(root));
  }
  std::vector<TranslationHypothesis> finished;
  std::vector<Candidate> candidates;
  while (!live.empty()) {
    candidates.clear();
    for (std::size_t b = 0; b < live.size(); ++b) {
      const auto lp = log_softmax(live[b].next_logits, live[b].ids, config.repetition_penalty);
      for (std::uint32_t id = 0; id < lp.size(); ++id)
        if (emittable(id)) candidates.push_back({b, id, live[b].log_prob + lp[id]});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.log_prob > b.log_prob;
                     });
    std::vector<Beam> next;
    std::size_t kept = 0;
    for (std::size_t rank = 0; rank < candidates.size() && kept < width; ++rank) {
      const auto& c = candidates[rank];
      auto ids = live[c.beam].ids;
      ids.push_back(c.token);
      if (c.token == kEosId) {
        if (rank < width)
          finished.push_back(finish(vocab, std::move(ids), c.log_prob, false, config.alpha));
        continue;
      }
      ++kept;
      if (ids.size() >= config.max_length) {
        finished.push_back(finish(vocab, std::move(ids), c.log_prob, true, config.alpha));
        continue;
      }
      Beam beam;
      beam.state = live[c.beam].state;
      beam.next_logits = decode_step(params, beam.state, c.token);
      beam.ids = std::move(ids);
      beam.log_prob = c.log_prob;
      next.push_back(std::move(beam));
    }
    live = std::move(next);
    if (finished.size() >= width && !live.empty()) {
      // Stop once no live beam can catch up. Log-probabilities only fall,
      // so at alpha = 0 this bound is exact; for alpha > 0 it assumes the
      // beam ends at its next step.
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& h : finished) best_finished = std::max(best_finished, h.score);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& b : live)
        best_live = std::max(best_live, normalized_score(b.log_prob, b.ids.size() + 1,
                                                         config.alpha));
      if (best_finished >= best_live) break;
    }
  }
  auto best = std::max_element(finished.begin(), finished.end(),
                               [](const TranslationHypothesis& a, const TranslationHypothesis& b) {
                                 return a.score < b.score;
                               });
  return std::move(*best);
}

}  // namespace

std::vector<std::string> DecodeConfig::problems() const {
  std::vector<std::string> out;
  if (beam_size < 1) out.push_back("beam_size must be >= 1");
  if (max_length < 1) out.push_back("max_length must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) out.push_back("alpha must be in [0, 1]");
  if (!(repetition_penalty > 0.0) || !std::isfinite(repetition_penalty))
    out.push_back("repetition_penalty must be finite and > 0");
  return out;
}

void DecodeConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid decode config:";
  for (const auto& s : p) msg += "\n  " + s;
  throw Error(ErrorCode::kInvalidArgument, msg);
}

double normalized_score(double log_prob, std::size_t length, double alpha) {
  if (length == 0 || alpha == 0.0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), alpha);
}

TranslationHypothesis translate(const Parameters<float>& params, const Vocabulary& vocab,
                                const FeatureSequence& source, const DecodeConfig& config) {
  config.validate();
  if (vocab.size() != params.config().vocab_size)
    throw Error(ErrorCode::kVocabMismatch,
                "vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                    std::to_string(params.config().vocab_size));
  const Matrix<float> memory = encode_source(params, source);
  const auto mask = source.frame_mask.empty() ? std::vector<std::uint8_t>(source.frames, 1)
                                              : source.frame_mask;
  auto state = start_decoding(params, memory, mask);
  if (config.beam_size == 1) return greedy(params, vocab, std::move(state), config);
  return beam_search(params, vocab, std::move(state), config);
}

std::vector<TranslationHypothesis> translate_all(const Parameters<float>& params,
                                                 const Vocabulary& vocab,
                                                 const std::vector<FeatureSequence>& sources,
                                                 const DecodeConfig& config) {
  std::vector<TranslationHypothesis> out;
  out.reserve(sources.size());
  for (const auto& src : sources) out.push_back(translate(params, vocab, src, config));
  return out;
}

}  // namespace p2tx
