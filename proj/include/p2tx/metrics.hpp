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

// Corpus-level BLEU-4 and chrF++.
//
// BLEU tokenization is the "international" scheme of mteval-v14 as used by
// sacreBLEU's `intl` tokenizer, applied as three left-to-right,
// non-overlapping rewrites over code points:
//   1. (non-number)(punctuation)    -> "$1 $2 "
//   2. (punctuation)(non-number)    -> " $1 $2"
//   3. (symbol)                     -> " $1 "
// followed by collapsing Unicode whitespace to single spaces. Categories are
// Unicode general categories N*, P* and S*.
//
// chrF++ follows sacreBLEU's CHRF(word_order=2): character n-grams 1..6 with
// whitespace removed, word n-grams 1..2 after splitting one leading or
// trailing ASCII punctuation mark off each word, beta = 2, statistics summed
// over the corpus, precision and recall averaged over orders with non-empty
// hypothesis and reference counts.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace p2tx {

enum class BleuSmoothing {
  kNone,  // any zero n-gram precision gives BLEU 0
  kExp,   // zero match counts become 1 / (2^k * total), k-th such order
};

struct BleuReport {
  double bleu = 0.0;                      // [0, 100]
  std::array<double, 4> precisions{};     // fractions in [0, 1], after smoothing
  std::array<std::uint64_t, 4> matches{};
  std::array<std::uint64_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::uint64_t hypothesis_length = 0;
  std::uint64_t reference_length = 0;
};

std::string tokenize_international(std::string_view text);

// Throws kInvalidArgument on length mismatch or an empty corpus.
BleuReport bleu4(std::span<const std::string> hypotheses,
                 std::span<const std::string> references,
                 BleuSmoothing smoothing = BleuSmoothing::kExp);

struct ChrfStatistics {
  // [hyp, ref, match] per order; char orders 1..6 then word orders 1..2.
  std::array<std::array<std::uint64_t, 3>, 8> counts{};
};

ChrfStatistics chrf_statistics(std::string_view hypothesis, std::string_view reference);
double chrf_score(const ChrfStatistics& stats);

double chrf_pp(std::span<const std::string> hypotheses,
               std::span<const std::string> references);

struct CorpusStats {
  double hours = 0.0;
  double unique_words = 0.0;
  double ratio = 0.0;  // hours per thousand unique words
};

// Unique whitespace-delimited words in `corpus`. Throws kInvalidArgument for
// a non-positive duration or a corpus without words.
CorpusStats corpus_stats(std::string_view corpus, double duration_hours);
CorpusStats corpus_stats_from_counts(double duration_hours, double unique_words);

}  // namespace p2tx
