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

// Byte-pair-encoding subword vocabulary.
//
// Text is split on Unicode whitespace. Each word becomes the boundary marker
// U+2581 followed by its code points, and merges are learned greedily over
// adjacent symbols. Ids 0-3 are always <pad>, <s>, </s>, <unk>.
//
// Vocabulary file (UTF-8):
//   P2TX-VOCAB v1 size=V merges=M
//   <id>\t<token>            V lines
//   <left>\t<right>\t<result> M lines

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace p2tx {

inline constexpr std::string_view kWordBoundary = "\xE2\x96\x81";  // U+2581

inline constexpr std::uint32_t kPadId = 0;
inline constexpr std::uint32_t kBosId = 1;
inline constexpr std::uint32_t kEosId = 2;
inline constexpr std::uint32_t kUnkId = 3;
inline constexpr std::uint32_t kNumSpecials = 4;

struct MergeRule {
  std::string left;
  std::string right;
  std::string result;
  bool operator==(const MergeRule&) const = default;
};

struct TokenSequence {
  std::vector<std::uint32_t> ids;
  bool operator==(const TokenSequence&) const = default;
};

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  // Throws kFormat when the parts break a vocabulary invariant.
  Vocabulary(std::vector<std::string> tokens, std::vector<MergeRule> merges);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<MergeRule>& merges() const { return merges_; }
  std::optional<std::uint32_t> id_of(std::string_view token) const;

  // Merge rank and result id for an adjacent id pair, if one exists.
  std::optional<std::pair<std::uint32_t, std::uint32_t>> merge_for(
      std::uint32_t left, std::uint32_t right) const;

  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

  // FNV-1a of serialize(); identifies the vocabulary inside checkpoints.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && merges_ == other.merges_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<MergeRule> merges_;
  std::unordered_map<std::string, std::uint32_t> index_;
  // (left << 32 | right) -> (rank, result id)
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> merge_index_;
};

std::string format_hash(std::uint64_t hash);

// Size of the base inventory: distinct code points in the corpora plus the
// boundary marker.
std::size_t character_inventory_size(std::span<const std::string> corpora);

// Greedy BPE training over the concatenation of `corpora`. Stops at
// `vocab_size` tokens or when no adjacent pair occurs at least twice; the
// achieved size is Vocabulary::size(). Ties go to the lexicographically
// smallest merged string, then the smallest left part.
// Throws kInvalidArgument when vocab_size < inventory + 4 or corpora is empty.
Vocabulary train_vocab(std::span<const std::string> corpora, std::size_t vocab_size);

// Whitespace-pretokenizes, applies merges in training order and maps code
// points outside the inventory to <unk>. Empty text gives an empty sequence.
TokenSequence encode(const Vocabulary& vocab, std::string_view text);

// Concatenates tokens, turns boundary markers back into single spaces and
// drops <pad>/<s>/</s>. <unk> renders as U+FFFD. Throws kOutOfRange for ids
// outside the vocabulary.
std::string decode(const Vocabulary& vocab, const TokenSequence& tokens);

}  // namespace p2tx
