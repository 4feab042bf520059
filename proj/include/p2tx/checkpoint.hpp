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

// Checkpoint file:
//
//   "P2TX-CKPT v1\n"
//   model config      7 x u32 (layers, heads, ffn_dim, embed_dim, input_dim,
//                     vocab_size, max_positions), f64 dropout
//   tensor count      u32
//   per tensor        u16 name length, name, u32 rank, rank x u32 dims,
//                     f32 values (row-major)
//   metadata          u64 updates, u32 epoch, u8 has_dev_bleu, f64 dev_bleu,
//                     u64 vocabulary hash
//
// All values little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "p2tx/model.hpp"

namespace p2tx {

struct Checkpoint {
  Parameters<float> params;
  std::uint64_t updates = 0;
  std::uint32_t epoch = 0;
  std::optional<double> dev_bleu;
  std::uint64_t vocab_hash = 0;

  const ModelConfig& config() const { return params.config(); }
};

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint_file(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

// Bit-level equality of every tensor plus metadata.
bool identical(const Checkpoint& a, const Checkpoint& b);

}  // namespace p2tx
