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

// Run configuration: an INI file with [paths], [data], [model], [training],
// [augmentation] and [decode] sections. Overrides are "section.key=value"
// strings applied after the file; P2TX_SEED sits between the two, so an
// explicit override still wins. Relative paths resolve against the config
// file's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "p2tx/augment.hpp"
#include "p2tx/error.hpp"
#include "p2tx/inference.hpp"
#include "p2tx/model.hpp"
#include "p2tx/pose.hpp"
#include "p2tx/trainer.hpp"

namespace p2tx {

// Carries every problem found, not just the first.
class ValidationError : public Error {
 public:
  ValidationError(std::string what, std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunPaths {
  std::filesystem::path run_dir;
  std::filesystem::path train_poses, train_text;
  std::filesystem::path dev_poses, dev_text;
  std::filesystem::path test_poses, test_text;
  std::filesystem::path vocab;
  std::filesystem::path checkpoints;  // default: run_dir / "checkpoints"
};

struct RunConfig {
  RunPaths paths;
  FrameRate target_fps{25, 1};
  std::vector<std::string> components;
  // input_dim and vocab_size are filled from the data and vocabulary.
  ModelConfig model;
  TrainingConfig training;
  bool augment = false;
  AugmentationPolicy augmentation;
  DecodeConfig decode;
  std::uint32_t average_best = 3;
};

// Flattened "section.key" -> value.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_ini(std::string_view text);

// Every recognised key; anything else is reported as unknown.
const std::vector<std::string>& known_config_keys();

// Builds a RunConfig from merged key/values. All problems (unknown keys,
// unparsable or out-of-range values) are collected into one
// ValidationError. Path existence is not checked here.
RunConfig build_run_config(const KeyValues& values, const std::filesystem::path& base_dir);

// File, then P2TX_SEED (when `env_seed` is non-null), then overrides.
RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides,
                          const char* env_seed);

// Throws ValidationError listing every missing input of a training run.
void require_training_inputs(const RunConfig& config);

}  // namespace p2tx
