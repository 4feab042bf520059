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
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "p2tx/metrics.hpp"
#include "p2tx/utf8.hpp"
#include "test_util.hpp"

namespace p2tx {
namespace {

using Corpus = std::vector<std::string>;

std::map<std::vector<std::string>, std::uint64_t> ngrams(const std::vector<std::string>& toks,
                                                          std::size_t n) {
  std::map<std::vector<std::string>, std::uint64_t> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

std::array<std::uint64_t, 3> clipped(const std::vector<std::string>& hyp,
                                     const std::vector<std::string>& ref, std::size_t n) {
  const auto h = ngrams(hyp, n), r = ngrams(ref, n);
  std::uint64_t nh = 0, nr = 0, m = 0;
  for (const auto& [g, c] : h) {
    nh += c;
    if (auto it = r.find(g); it != r.end()) m += std::min(c, it->second);
  }
  for (const auto& [g, c] : r) nr += c;
  return {nh, nr, m};
}

std::string random_text(Rng& rng) {
  static const Corpus words = {"der", "die", "das", "Hund", "Katze", "läuft", "schnell",
                               "heute", "nicht", "ja", ",", "."};
  std::string s;
  const auto n = rng.below(9);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng.below(words.size())];
  }
  return s;
}

TEST(Bleu, HandComputedSinglePair) {
  // Clipped counts 5/6, 3/5, 2/4, 1/3; equal lengths.
  const Corpus hyp{"the cat sat on the mat"}, ref{"the cat sat on a mat"};
  const auto r = bleu4(hyp, ref);
  EXPECT_EQ(r.matches, (std::array<std::uint64_t, 4>{5, 3, 2, 1}));
  EXPECT_EQ(r.totals, (std::array<std::uint64_t, 4>{6, 5, 4, 3}));
  EXPECT_DOUBLE_EQ(r.brevity_penalty, 1.0);
  EXPECT_NEAR(r.bleu, 100.0 * std::pow(5.0 / 6 * 3.0 / 5 * 2.0 / 4 * 1.0 / 3, 0.25), 1e-6);
  EXPECT_NEAR(r.bleu, 53.7284965911771, 1e-6);
}

TEST(Bleu, HandComputedWithBrevityPenalty) {
  // Totals 8/8, 5/6, 3/4, 1/2; hypothesis 8 tokens, reference 9.
  const Corpus hyp{"the quick brown fox", "jumps over the dog"};
  const Corpus ref{"the quick brown fox", "jumps over the lazy dog"};
  const auto r = bleu4(hyp, ref);
  EXPECT_EQ(r.hypothesis_length, 8u);
  EXPECT_EQ(r.reference_length, 9u);
  EXPECT_NEAR(r.brevity_penalty, std::exp(1.0 - 9.0 / 8.0), 1e-12);
  EXPECT_NEAR(r.bleu, 100.0 * std::exp(-0.125) * std::pow(5.0 / 16, 0.25), 1e-6);
}

TEST(Bleu, ExpSmoothingOfZeroMatches) {
  // 3/4, 2/3, 1/2 and 0/1; the zero becomes 1 / (2 * 1).
  const Corpus hyp{"a b c d"}, ref{"a b c e"};
  const auto smoothed = bleu4(hyp, ref);
  EXPECT_NEAR(smoothed.bleu, 100.0 * std::pow(1.0 / 8, 0.25), 1e-6);
  EXPECT_NEAR(smoothed.precisions[3], 0.5, 1e-12);
  EXPECT_EQ(bleu4(hyp, ref, BleuSmoothing::kNone).bleu, 0.0);
}

TEST(Bleu, ExpSmoothingDoublesPerZeroOrder) {
  // 2/4, 0/3, 0/2, 0/1: zeros become 1/(2*3), 1/(4*2), 1/(8*1).
  const Corpus hyp{"a x b y"}, ref{"a q b r"};
  const auto r = bleu4(hyp, ref);
  const double expected = 100.0 * std::pow(0.5 / 6 / 8 / 8, 0.25);
  EXPECT_NEAR(r.bleu, expected, 1e-6);
}

TEST(Bleu, ShortSentenceWithoutFourGramsScoresZero) {
  const Corpus hyp{"the cat sat"}, ref{"the cat sat down"};
  const auto r = bleu4(hyp, ref);
  EXPECT_EQ(r.totals[3], 0u);
  EXPECT_EQ(r.bleu, 0.0);
}

TEST(Bleu, PerfectMatchIsExactly100) {
  const Corpus c{"Ich gehe heute nach Hause .", "Das Wetter ist schön, oder?",
                 "Guten Abend meine Damen und Herren"};
  EXPECT_EQ(bleu4(c, c).bleu, 100.0);
  EXPECT_EQ(bleu4(c, c, BleuSmoothing::kNone).bleu, 100.0);
}

TEST(Bleu, NoMatchesAndEmptyHypotheses) {
  EXPECT_EQ(bleu4(Corpus{"x y z w"}, Corpus{"a b c d"}).bleu, 0.0);
  const auto r = bleu4(Corpus{""}, Corpus{"a b c d"});
  EXPECT_EQ(r.bleu, 0.0);
  EXPECT_EQ(r.brevity_penalty, 0.0);
}

TEST(Bleu, CountsMatchBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Corpus hyp, ref;
    for (int i = 0; i < 5; ++i) {
      hyp.push_back(random_text(rng));
      ref.push_back(random_text(rng));
    }
    std::array<std::uint64_t, 4> m{}, t{};
    std::uint64_t hl = 0, rl = 0;
    for (std::size_t s = 0; s < hyp.size(); ++s) {
      const auto h = utf8::split_whitespace(std::string_view(tokenize_international(hyp[s])));
      const auto r = utf8::split_whitespace(std::string_view(tokenize_international(ref[s])));
      hl += h.size();
      rl += r.size();
      for (std::size_t n = 1; n <= 4; ++n) {
        const auto c = clipped(h, r, n);
        t[n - 1] += c[0];
        m[n - 1] += c[2];
      }
    }
    const auto report = bleu4(hyp, ref);
    EXPECT_EQ(report.matches, m);
    EXPECT_EQ(report.totals, t);
    EXPECT_EQ(report.hypothesis_length, hl);
    EXPECT_EQ(report.reference_length, rl);
    EXPECT_GE(report.bleu, 0.0);
    EXPECT_LE(report.bleu, 100.0);
  }
}

TEST(Bleu, PermutationInvariant) {
  Rng rng(2);
  Corpus hyp, ref;
  for (int i = 0; i < 12; ++i) {
    hyp.push_back(random_text(rng));
    ref.push_back(random_text(rng));
  }
  std::vector<std::size_t> order(hyp.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double base = bleu4(hyp, ref).bleu;
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(order);
    Corpus h2, r2;
    for (auto i : order) {
      h2.push_back(hyp[i]);
      r2.push_back(ref[i]);
    }
    EXPECT_EQ(bleu4(h2, r2).bleu, base);
  }
}

TEST(Bleu, AddingExactPairNeverLowersPrecisions) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Corpus hyp{random_text(rng) + " a b c d", random_text(rng)};
    Corpus ref{random_text(rng) + " a b c", random_text(rng)};
    const auto before = bleu4(hyp, ref, BleuSmoothing::kNone);
    const auto extra = random_text(rng);
    hyp.push_back(extra);
    ref.push_back(extra);
    const auto after = bleu4(hyp, ref, BleuSmoothing::kNone);
    for (int n = 0; n < 4; ++n) {
      if (before.totals[n] == 0) continue;
      EXPECT_GE(after.precisions[n] + 1e-12, before.precisions[n]);
    }
  }
}

TEST(Bleu, Errors) {
  EXPECT_P2TX_ERROR(bleu4(Corpus{"a"}, Corpus{"a", "b"}), ErrorCode::kInvalidArgument);
  EXPECT_P2TX_ERROR(bleu4(Corpus{}, Corpus{}), ErrorCode::kInvalidArgument);
  EXPECT_P2TX_ERROR(chrf_pp(Corpus{"a"}, Corpus{}), ErrorCode::kInvalidArgument);
}

TEST(TokenizeInternational, Cases) {
  EXPECT_EQ(tokenize_international("Hallo, Welt!"), "Hallo , Welt !");
  EXPECT_EQ(tokenize_international("3.14 und 1,000"), "3.14 und 1,000");
  EXPECT_EQ(tokenize_international("Preis: 5$"), "Preis : 5 $");
  EXPECT_EQ(tokenize_international("\"Zitat\""), "\" Zitat \"");
  EXPECT_EQ(tokenize_international("  viel   Platz \t"), "viel Platz");
  EXPECT_EQ(tokenize_international("Straße—Weg"), "Straße — Weg");
  EXPECT_EQ(tokenize_international(""), "");
}

TEST(Chrf, HandComputedCharacterOnlyOverlap) {
  // char 1-grams 1/2 both ways; char 2-grams and word 1-grams 0; three
  // effective orders.
  EXPECT_NEAR(chrf_pp(Corpus{"ab"}, Corpus{"ac"}), 100.0 * 0.5 / 3, 1e-6);
}

TEST(Chrf, HandComputedUnequalPrecisionRecall) {
  // Orders with counts: c1 2/3/2, c2 1/2/1, w1 1/1/0.
  const double p = (1.0 + 1.0 + 0.0) / 3, r = (2.0 / 3 + 0.5 + 0.0) / 3;
  EXPECT_NEAR(chrf_pp(Corpus{"ab"}, Corpus{"abc"}), 100.0 * 5 * p * r / (4 * p + r), 1e-6);
  EXPECT_NEAR(chrf_pp(Corpus{"ab"}, Corpus{"abc"}), 42.424242424242, 1e-6);
}

TEST(Chrf, HandComputedThreePairCorpus) {
  // Summed [hyp, ref, match]: c1 10/11/8, c2 7/8/4, c3 4/5/1, c4 3/3/0,
  // c5 2/2/0, c6 1/1/0, w1 4/4/1, w2 1/1/0.
  const Corpus hyp{"the cat", "ab", "ab"}, ref{"the hat", "abc", "ac"};
  ChrfStatistics total;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto st = chrf_statistics(hyp[s], ref[s]);
    for (std::size_t o = 0; o < 8; ++o)
      for (std::size_t k = 0; k < 3; ++k) total.counts[o][k] += st.counts[o][k];
  }
  const std::array<std::array<std::uint64_t, 3>, 8> expected = {{{10, 11, 8},
                                                                 {7, 8, 4},
                                                                 {4, 5, 1},
                                                                 {3, 3, 0},
                                                                 {2, 2, 0},
                                                                 {1, 1, 0},
                                                                 {4, 4, 1},
                                                                 {1, 1, 0}}};
  EXPECT_EQ(total.counts, expected);
  const double p = (0.8 + 4.0 / 7 + 0.25 + 0.25) / 8;
  const double r = (8.0 / 11 + 0.5 + 0.2 + 0.25) / 8;
  EXPECT_NEAR(chrf_pp(hyp, ref), 100.0 * 5 * p * r / (4 * p + r), 1e-6);
}

TEST(Chrf, PerfectAndDisjoint) {
  const Corpus c{"Guten Morgen.", "Wie geht's?", "Sehr gut, danke"};
  EXPECT_EQ(chrf_pp(c, c), 100.0);
  EXPECT_EQ(chrf_pp(Corpus{"abc def"}, Corpus{"xyz uvw"}), 0.0);
}

TEST(Chrf, PunctuationSplitOffWordEdges) {
  const auto st = chrf_statistics("Welt!", "Welt !");
  // Words: {Welt, !} on both sides.
  EXPECT_EQ(st.counts[6], (std::array<std::uint64_t, 3>{2, 2, 2}));
}

TEST(Chrf, StatisticsMatchBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto hyp = random_text(rng), ref = random_text(rng);
    const auto st = chrf_statistics(hyp, ref);
    auto chars = [](const std::string& s) {
      std::vector<std::string> out;
      for (auto& cp : utf8::split_code_points(s))
        if (cp != " ") out.push_back(cp);
      return out;
    };
    for (std::size_t n = 1; n <= 6; ++n)
      EXPECT_EQ(st.counts[n - 1], clipped(chars(hyp), chars(ref), n)) << hyp << " | " << ref;
  }
}

TEST(Chrf, SinglePairEqualsSentenceScore) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto hyp = random_text(rng), ref = random_text(rng);
    EXPECT_EQ(chrf_pp(Corpus{hyp}, Corpus{ref}), chrf_score(chrf_statistics(hyp, ref)));
  }
}

TEST(Chrf, BoundsAndPermutationInvariance) {
  Rng rng(6);
  Corpus hyp, ref;
  for (int i = 0; i < 10; ++i) {
    hyp.push_back(random_text(rng));
    ref.push_back(random_text(rng));
  }
  const double base = chrf_pp(hyp, ref);
  EXPECT_GE(base, 0.0);
  EXPECT_LE(base, 100.0);
  std::reverse(hyp.begin(), hyp.end());
  std::reverse(ref.begin(), ref.end());
  EXPECT_EQ(chrf_pp(hyp, ref), base);
}

TEST(CorpusStats, RatioArithmetic) {
  EXPECT_NEAR(corpus_stats_from_counts(19, 21000).ratio, 19.0 / 21, 1e-12);
  EXPECT_EQ(std::round(corpus_stats_from_counts(19, 21000).ratio * 100) / 100, 0.90);
  EXPECT_EQ(std::round(corpus_stats_from_counts(11, 3000).ratio * 100) / 100, 3.67);
  EXPECT_EQ(std::round(corpus_stats_from_counts(16, 19000).ratio * 100) / 100, 0.84);
}

TEST(CorpusStats, FromText) {
  const auto one = corpus_stats("Hallo", 1.0);
  EXPECT_EQ(one.unique_words, 1.0);
  EXPECT_DOUBLE_EQ(one.ratio, 1000.0);
  const auto s = corpus_stats("a b a\nc  b\n\td", 2.0);
  EXPECT_EQ(s.unique_words, 4.0);
  EXPECT_DOUBLE_EQ(s.ratio, 500.0);
}

TEST(CorpusStats, Errors) {
  EXPECT_P2TX_ERROR(corpus_stats("a", 0.0), ErrorCode::kInvalidArgument);
  EXPECT_P2TX_ERROR(corpus_stats("  \n", 1.0), ErrorCode::kInvalidArgument);
  EXPECT_P2TX_ERROR(corpus_stats_from_counts(-1.0, 10), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace p2tx
