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

#include <cstring>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "p2tx/checkpoint.hpp"
#include "test_util.hpp"

namespace p2tx {
namespace {

Checkpoint sample_checkpoint(std::uint64_t seed) {
  return {init_parameters<float>(testing::tiny_config(), seed), 1234, 7, 12.5,
          0xfeedfacecafebeefULL};
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto ckpt = sample_checkpoint(1);
  const auto bytes = save_checkpoint(ckpt);
  const auto back = load_checkpoint(bytes);
  EXPECT_TRUE(identical(ckpt, back));
  EXPECT_EQ(back.updates, 1234u);
  EXPECT_EQ(back.epoch, 7u);
  EXPECT_EQ(back.dev_bleu, 12.5);
  EXPECT_EQ(back.vocab_hash, 0xfeedfacecafebeefULL);
  EXPECT_EQ(save_checkpoint(back), bytes);
}

TEST(Checkpoint, ReloadedModelGivesIdenticalOutputs) {
  Rng rng(2);
  const auto ckpt = sample_checkpoint(2);
  const auto back = load_checkpoint(save_checkpoint(ckpt));
  const auto src = testing::random_features(rng, 6, 6);
  const TokenSequence tgt{{kBosId, 5, 6, 7}};
  EXPECT_EQ(forward(ckpt.params, src, tgt, false).logits,
            forward(back.params, src, tgt, false).logits);
}

TEST(Checkpoint, MissingDevScoreSurvives) {
  auto ckpt = sample_checkpoint(3);
  ckpt.dev_bleu.reset();
  EXPECT_FALSE(load_checkpoint(save_checkpoint(ckpt)).dev_bleu.has_value());
}

TEST(Checkpoint, FileRoundTrip) {
  testing::TempDir dir;
  const auto ckpt = sample_checkpoint(4);
  write_checkpoint_file(dir / "a.ckpt", ckpt);
  EXPECT_TRUE(identical(read_checkpoint_file(dir / "a.ckpt"), ckpt));
  EXPECT_P2TX_ERROR(read_checkpoint_file(dir / "missing.ckpt"), ErrorCode::kIo);
}

TEST(Checkpoint, IdenticalDetectsSingleBitChanges) {
  const auto a = sample_checkpoint(5);
  auto b = a;
  b.params.embedding(0, 0) = std::nextafter(b.params.embedding(0, 0), 1.0f);
  EXPECT_FALSE(identical(a, b));
  auto c = a;
  c.epoch = 8;
  EXPECT_FALSE(identical(a, c));
}

TEST(Checkpoint, CorruptInputs) {
  const auto bytes = save_checkpoint(sample_checkpoint(6));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_P2TX_ERROR(load_checkpoint(bad_magic), ErrorCode::kFormat);
  EXPECT_P2TX_ERROR(load_checkpoint(std::span(bytes).first(5)), ErrorCode::kFormat);
  for (std::size_t cut : {std::size_t{13}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_P2TX_ERROR(load_checkpoint(std::span(bytes).first(cut)), ErrorCode::kTruncated)
        << cut;
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_P2TX_ERROR(load_checkpoint(trailing), ErrorCode::kFormat);
}

TEST(Checkpoint, NonFiniteTensorIsCorrupt) {
  auto ckpt = sample_checkpoint(7);
  ckpt.params.input_proj(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_P2TX_ERROR(load_checkpoint(save_checkpoint(ckpt)), ErrorCode::kCorrupt);
}

TEST(Checkpoint, InvalidStoredConfigIsFormatError) {
  auto bytes = save_checkpoint(sample_checkpoint(8));
  // heads is the second u32 after the 13-byte magic line; 3 does not divide 8.
  const std::uint32_t heads = 3;
  std::memcpy(bytes.data() + 13 + 4, &heads, 4);
  EXPECT_P2TX_ERROR(load_checkpoint(bytes), ErrorCode::kFormat);
}

}  // namespace
}  // namespace p2tx
