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

// Teacher-forced training, dev-set checkpoint selection, fine-tuning from a
// pretrained checkpoint, and checkpoint averaging.
//
// Loss per target position is cross-entropy against the smoothed label
//   q_k = eps / V + (1 - eps) * [k == y]
// averaged over every target position in the batch. The decoder reads
// <s> + target and predicts target + </s>.
//
// Optimizer: Adam (beta1 0.9, beta2 0.98, eps 1e-9) with
//   lr(step) = peak * min(step / warmup, sqrt(warmup / step)),  step >= 1.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "p2tx/augment.hpp"
#include "p2tx/checkpoint.hpp"
#include "p2tx/inference.hpp"
#include "p2tx/model.hpp"
#include "p2tx/pose.hpp"
#include "p2tx/rng.hpp"
#include "p2tx/tokenizer.hpp"

namespace p2tx {

struct TrainingConfig {
  std::uint32_t max_epochs = 100;
  std::uint32_t batch_size = 16;
  double learning_rate = 5e-4;  // peak
  std::uint32_t warmup_updates = 4000;
  double label_smoothing = 0.1;
  double clip_norm = 1.0;       // <= 0 disables clipping
  std::uint32_t eval_every = 1; // epochs
  std::uint32_t patience = 10;  // evaluations without improvement
  std::uint64_t seed = 0;
  std::optional<AugmentationPolicy> augmentation;
  std::filesystem::path pretrained;  // empty: train from scratch
  std::uint32_t max_source_frames = 4096;
  DecodeConfig dev_decode{1, 128, 1.0, 1.0};

  std::vector<std::string> problems() const;
  void validate() const;
};

struct AdamState {
  explicit AdamState(const ModelConfig& config);
  Parameters<float> m, v;
  std::uint64_t step = 0;
};

double learning_rate_at(const TrainingConfig& config, std::uint64_t step);

struct LossResult {
  double loss = 0.0;  // summed over positions
  double nll = 0.0;   // summed -log p(label)
  Matrix<float> dlogits;
};

// Label-smoothed cross-entropy summed over rows; dlogits is d(sum)/d(logits).
LossResult smoothed_cross_entropy(const Matrix<float>& logits,
                                  const std::vector<std::uint32_t>& labels,
                                  double smoothing);

double global_norm(const Parameters<float>& grads);
// Rescales so the global norm is at most max_norm; returns the norm before.
double clip_gradients(Parameters<float>& grads, double max_norm);

struct TrainingExample {
  FeatureSequence source;
  TokenSequence target;  // without <s>/</s>
};

struct StepResult {
  double loss = 0.0;  // mean over target positions
  double nll = 0.0;
  std::uint64_t tokens = 0;
  double grad_norm = 0.0;  // before clipping
  double learning_rate = 0.0;
};

// One optimizer update on the batch. Throws kInvalidArgument for an empty
// batch and kNonFinite when the loss is not finite (params untouched).
StepResult train_step(Parameters<float>& params, std::span<const TrainingExample> batch,
                      const TrainingConfig& config, AdamState& optimizer, Rng& rng);

// Poses with aligned sentences. `components` selects what flatten() uses;
// empty means every component.
struct Dataset {
  std::vector<PoseSequence> poses;
  std::vector<std::string> sentences;
  std::vector<std::string> components;
};

struct TrainingLogEntry {
  std::uint32_t epoch = 0;
  std::uint64_t update = 0;
  double loss = 0.0;
  double nll = 0.0;
  double learning_rate = 0.0;
  std::optional<double> dev_bleu;
  double wall_seconds = 0.0;
};

std::string to_json_line(const TrainingLogEntry& entry);

struct TrainingHooks {
  // Replaces decoding + BLEU on the dev set when set.
  std::function<double(const Parameters<float>&)> evaluator;
  std::function<void(const TrainingLogEntry&)> on_log;
  std::function<void(const std::string&)> on_warning;
};

struct TrainingResult {
  std::vector<Checkpoint> checkpoints;  // dev BLEU descending, later epoch first on ties
  std::vector<TrainingLogEntry> log;
  std::uint32_t evaluations = 0;
};

// Runs up to max_epochs, evaluating every eval_every epochs and after the
// last one; stops early after `patience` evaluations without improvement.
// With a pretrained checkpoint its weights seed the run (optimizer and
// schedule restart) and an epoch-0 evaluation is recorded first.
// Errors: kVocabMismatch naming both hashes, kConfigMismatch, kNonFinite.
TrainingResult train(const ModelConfig& model_config, const Vocabulary& vocab,
                     const Dataset& train_set, const Dataset& dev_set,
                     const TrainingConfig& config, const TrainingHooks& hooks = {});

// Smoothed corpus BLEU of decoded dev hypotheses.
double dev_bleu(const Parameters<float>& params, const Vocabulary& vocab,
                const Dataset& dev_set, const DecodeConfig& decode);

// Elementwise mean accumulated in double and rounded once; updates = max,
// epoch = max, dev score cleared. Throws kInvalidArgument for an empty list,
// kConfigMismatch for differing configs, kVocabMismatch for differing
// vocabulary hashes.
Checkpoint average_checkpoints(std::span<const Checkpoint> checkpoints);

// Top n by dev BLEU, later epoch first on ties. Throws kInvalidArgument when
// fewer than n checkpoints carry a score.
std::vector<Checkpoint> select_best(std::span<const Checkpoint> checkpoints, std::size_t n);

}  // namespace p2tx
