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

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "p2tx/tokenizer.hpp"
#include "p2tx/utf8.hpp"
#include "test_util.hpp"

namespace p2tx {

void PrintTo(const MergeRule& m, std::ostream* os) {
  *os << '(' << m.left << ' ' << m.right << ')';
}

namespace {

// Reference trainer: recount every pair from scratch after each merge. Stops
// once `new_tokens` distinct merge results exist (a result can repeat).
std::vector<MergeRule> reference_merges(const std::vector<std::string>& corpora,
                                        std::size_t new_tokens) {
  std::map<std::string, std::int64_t> freq;
  for (const auto& c : corpora)
    for (const auto& w : utf8::split_whitespace(std::string_view(c))) ++freq[w];
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> words;
  for (const auto& [w, f] : freq) {
    std::vector<std::string> syms{std::string(kWordBoundary)};
    for (auto& cp : utf8::split_code_points(w)) syms.push_back(cp);
    words.emplace_back(syms, f);
  }
  std::vector<MergeRule> merges;
  std::set<std::string> made;
  while (made.size() < new_tokens) {
    std::map<std::pair<std::string, std::string>, std::int64_t> counts;
    for (const auto& [syms, f] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) counts[{syms[i], syms[i + 1]}] += f;
    const std::pair<std::string, std::string>* best = nullptr;
    std::int64_t best_count = 2;
    for (const auto& [pair, n] : counts) {
      if (n < best_count) continue;
      if (best && n == best_count) {  // ties: smallest merged string, then left
        const auto a = pair.first + pair.second, b = best->first + best->second;
        if (a > b || (a == b && pair.first >= best->first)) continue;
      }
      best = &pair;
      best_count = n;
    }
    if (!best) break;
    const MergeRule rule{best->first, best->second, best->first + best->second};
    merges.push_back(rule);
    made.insert(rule.result);
    for (auto& [syms, f] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == rule.left && syms[i + 1] == rule.right) {
          next.push_back(rule.result);
          i += 2;
        } else {
          next.push_back(syms[i++]);
        }
      }
      syms = std::move(next);
    }
  }
  return merges;
}

// Reference encoder: apply each merge, in order, across the whole word.
std::vector<std::string> reference_encode(const Vocabulary& vocab, const std::string& text) {
  std::vector<std::string> out;
  for (const auto& w : utf8::split_whitespace(std::string_view(text))) {
    std::vector<std::string> syms{std::string(kWordBoundary)};
    for (auto& cp : utf8::split_code_points(w)) syms.push_back(cp);
    for (const auto& m : vocab.merges()) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == m.left && syms[i + 1] == m.right) {
          next.push_back(m.result);
          i += 2;
        } else {
          next.push_back(syms[i++]);
        }
      }
      syms = std::move(next);
    }
    out.insert(out.end(), syms.begin(), syms.end());
  }
  return out;
}

std::string random_sentence(Rng& rng, std::size_t max_words) {
  static const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "n",
                                                    "r", "s", "\xC3\xA4", "\xC3\x9F"};
  static const std::vector<std::string> spaces = {" ", "  ", "\t", "\n", "\xE3\x80\x80"};
  std::string s;
  const auto words = 1 + rng.below(max_words);
  for (std::uint64_t w = 0; w < words; ++w) {
    if (w > 0 || rng.below(4) == 0) s += spaces[rng.below(spaces.size())];
    const auto len = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
  }
  if (rng.below(3) == 0) s += " ";
  return s;
}

std::string normalize_whitespace(const std::string& s) {
  std::string out;
  for (const auto& w : utf8::split_whitespace(std::string_view(s))) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::vector<std::string> random_corpus(Rng& rng, std::size_t lines) {
  std::vector<std::string> corpus;
  for (std::size_t i = 0; i < lines; ++i) corpus.push_back(random_sentence(rng, 8));
  return corpus;
}

TEST(TrainVocab, FirstMergeOfRepeatedLetters) {
  const std::vector<std::string> corpus{"aaaa aaaa"};
  const auto v = train_vocab(corpus, 7);
  ASSERT_EQ(v.merges().size(), 1u);
  EXPECT_EQ(v.merges()[0], (MergeRule{"a", "a", "aa"}));
}

TEST(TrainVocab, MatchesReferenceTrainer) {
  Rng rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const auto corpus = random_corpus(rng, 20);
    const std::size_t budget = 4 + character_inventory_size(corpus) + 40;
    const auto v = train_vocab(corpus, budget);
    const auto expected = reference_merges(corpus, 40);
    EXPECT_EQ(v.merges().size(), expected.size());
    for (std::size_t i = 0; i < std::min(v.merges().size(), expected.size()); ++i)
      ASSERT_EQ(v.merges()[i], expected[i]) << "trial " << trial << " merge " << i;
    std::set<std::string> results;
    for (const auto& m : expected) results.insert(m.result);
    EXPECT_EQ(v.size(), 4 + character_inventory_size(corpus) + results.size());
  }
}

TEST(TrainVocab, MergeCountIsBudgetMinusBase) {
  const std::vector<std::string> corpus{"ab ab ab abc abc abd"};
  const auto base = character_inventory_size(corpus);
  EXPECT_EQ(base, 5u);  // a b c d and the boundary marker
  EXPECT_EQ(train_vocab(corpus, base + 4).merges().size(), 0u);
  EXPECT_EQ(train_vocab(corpus, base + 5).merges().size(), 1u);
  EXPECT_EQ(train_vocab(corpus, base + 6).merges().size(), 2u);
}

TEST(TrainVocab, StopsWhenNoPairRepeats) {
  const std::vector<std::string> corpus{"xy"};
  const auto v = train_vocab(corpus, 1000);
  EXPECT_EQ(v.merges().size(), 0u);
  EXPECT_EQ(v.size(), 7u);
}

TEST(TrainVocab, RejectsTooSmallSizeAndEmptyInput) {
  const std::vector<std::string> corpus{"abc"};
  EXPECT_P2TX_ERROR(train_vocab(corpus, 7), ErrorCode::kInvalidArgument);
  EXPECT_P2TX_ERROR(train_vocab(std::vector<std::string>{}, 100),
                    ErrorCode::kInvalidArgument);
}

TEST(TrainVocab, DeterministicAndByteIdentical) {
  Rng rng(3);
  const auto corpus = random_corpus(rng, 30);
  const auto a = train_vocab(corpus, 80), b = train_vocab(corpus, 80);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(a.hash(), b.hash());
}

TEST(TrainVocab, LargerBudgetExtendsSmallerOne) {
  Rng rng(4);
  const auto corpus = random_corpus(rng, 30);
  const auto small = train_vocab(corpus, 50), big = train_vocab(corpus, 90);
  ASSERT_LE(small.size(), big.size());
  for (std::uint32_t i = 0; i < small.size(); ++i) EXPECT_EQ(small.token(i), big.token(i));
  for (std::size_t i = 0; i < small.merges().size(); ++i)
    EXPECT_EQ(small.merges()[i], big.merges()[i]);
}

TEST(Encode, MatchesSequentialMergeApplication) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto corpus = random_corpus(rng, 25);
    const auto v = train_vocab(corpus, 70);
    for (int i = 0; i < 20; ++i) {
      const auto text = random_sentence(rng, 6);
      std::vector<std::string> got;
      for (auto id : encode(v, text).ids) got.push_back(v.token(id));
      EXPECT_EQ(got, reference_encode(v, text)) << text;
    }
  }
}

TEST(Encode, RoundTripsNormalizedText) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    auto corpus = random_corpus(rng, 25);
    // Every alphabet letter in the inventory, so nothing maps to <unk>.
    corpus.push_back("abcdenrs\xC3\xA4\xC3\x9F");
    const auto v = train_vocab(corpus, 60 + 10 * trial);
    for (int i = 0; i < 50; ++i) {
      const auto text = random_sentence(rng, 7);
      EXPECT_EQ(decode(v, encode(v, text)), normalize_whitespace(text));
    }
  }
}

TEST(Encode, EmptyAndWhitespaceOnly) {
  const auto v = train_vocab(std::vector<std::string>{"ab ab"}, 20);
  EXPECT_TRUE(encode(v, "").ids.empty());
  EXPECT_TRUE(encode(v, " \t\n").ids.empty());
  EXPECT_EQ(decode(v, {}), "");
}

TEST(Encode, TwoCharacterWordWithoutMerges) {
  const auto v = train_vocab(std::vector<std::string>{"ab"}, 7);
  const auto ids = encode(v, "ab").ids;
  // Boundary marker and "a" and "b", none merged.
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(v.token(ids[0]), kWordBoundary);
  EXPECT_EQ(v.token(ids[1]), "a");
  EXPECT_EQ(v.token(ids[2]), "b");
}

TEST(Encode, UnknownCharactersBecomeUnk) {
  const auto v = train_vocab(std::vector<std::string>{"ab ab"}, 20);
  const auto ids = encode(v, "axb").ids;
  EXPECT_NE(std::find(ids.begin(), ids.end(), kUnkId), ids.end());
  EXPECT_EQ(decode(v, encode(v, "axb")), "a\xEF\xBF\xBD" "b");
}

TEST(Decode, SpecialsAreDroppedAndUnkIsReplacementChar) {
  const Vocabulary v;
  EXPECT_EQ(decode(v, {{kPadId, kBosId, kEosId, kPadId}}), "");
  EXPECT_EQ(decode(v, {{kBosId, kUnkId, kEosId}}), "\xEF\xBF\xBD");
}

TEST(Decode, OutOfRangeId) {
  const Vocabulary v;
  EXPECT_P2TX_ERROR(decode(v, {{4}}), ErrorCode::kOutOfRange);
}

TEST(VocabularyFile, RoundTrip) {
  Rng rng(8);
  const auto v = train_vocab(random_corpus(rng, 20), 60);
  const auto text = v.serialize();
  const auto back = Vocabulary::parse(text);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.hash(), v.hash());
}

TEST(VocabularyFile, HeaderFormat) {
  const auto v = train_vocab(std::vector<std::string>{"aa aa"}, 7);
  const auto text = v.serialize();
  EXPECT_TRUE(text.starts_with("P2TX-VOCAB v1 size=7 merges=1\n0\t<pad>\n1\t<s>\n2\t</s>\n3\t<unk>\n"))
      << text;
  EXPECT_EQ(format_hash(v.hash()).size(), 16u);
}

TEST(VocabularyFile, MalformedInputs) {
  const auto good = train_vocab(std::vector<std::string>{"aa aa"}, 7).serialize();
  EXPECT_P2TX_ERROR(Vocabulary::parse("hello"), ErrorCode::kFormat);
  EXPECT_P2TX_ERROR(Vocabulary::parse(good.substr(0, good.size() / 2)), ErrorCode::kTruncated);
  EXPECT_P2TX_ERROR(Vocabulary::parse(good + "junk\n"), ErrorCode::kFormat);
  std::string swapped = good;
  swapped.replace(swapped.find("<pad>"), 5, "<PAD>");
  EXPECT_P2TX_ERROR(Vocabulary::parse(swapped), ErrorCode::kFormat);
  EXPECT_P2TX_ERROR(Vocabulary({"<pad>", "<s>", "</s>", "<unk>", "x", "x"}, {}),
                    ErrorCode::kFormat);
  EXPECT_P2TX_ERROR(Vocabulary({"<pad>", "<s>", "</s>", "<unk>", "a", "b"},
                               {{"a", "b", "ab"}}),
                    ErrorCode::kFormat);
}

}  // namespace
}  // namespace p2tx
