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

#include "p2tx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "p2tx/error.hpp"
#include "p2tx/utf8.hpp"

namespace p2tx {
namespace {

template <class Pred1, class Pred2>
std::u32string rewrite_pairs(const std::u32string& s, Pred1 first, Pred2 second,
                             bool space_before) {
  std::u32string out;
  out.reserve(s.size() * 2);
  std::size_t i = 0;
  while (i < s.size()) {
    if (i + 1 < s.size() && first(s[i]) && second(s[i + 1])) {
      if (space_before) out.push_back(U' ');
      out.push_back(s[i]);
      out.push_back(U' ');
      out.push_back(s[i + 1]);
      if (!space_before) out.push_back(U' ');
      i += 2;
    } else {
      out.push_back(s[i]);
      ++i;
    }
  }
  return out;
}

void check_corpus(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.size() != refs.size())
    throw Error(ErrorCode::kInvalidArgument,
                "hypothesis count " + std::to_string(hyps.size()) +
                    " != reference count " + std::to_string(refs.size()));
  if (hyps.empty()) throw Error(ErrorCode::kInvalidArgument, "empty corpus");
}

using NgramCounts = std::unordered_map<std::u32string, std::uint64_t>;

NgramCounts word_ngrams(const std::vector<std::u32string>& words, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::u32string key = words[i];
    for (std::size_t j = 1; j < n; ++j) {
      key.push_back(U' ');
      key += words[i + j];
    }
    ++counts[key];
  }
  return counts;
}

NgramCounts char_ngrams(const std::u32string& s, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

std::array<std::uint64_t, 3> match_statistics(const NgramCounts& hyp, const NgramCounts& ref) {
  std::uint64_t nh = 0, nr = 0, nm = 0;
  for (const auto& [g, c] : hyp) {
    nh += c;
    if (auto it = ref.find(g); it != ref.end()) nm += std::min(c, it->second);
  }
  for (const auto& [g, c] : ref) nr += c;
  return {nh, nr, nm};
}

bool is_ascii_punct(char32_t c) {
  static constexpr std::u32string_view kPuncts = U"!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return kPuncts.find(c) != std::u32string_view::npos;
}

std::vector<std::u32string> chrf_words(const std::u32string& s) {
  std::vector<std::u32string> out;
  for (auto& w : utf8::split_whitespace(std::u32string_view(s))) {
    if (w.size() == 1) {
      out.push_back(std::move(w));
    } else if (is_ascii_punct(w.back())) {
      out.push_back(w.substr(0, w.size() - 1));
      out.push_back(w.substr(w.size() - 1));
    } else if (is_ascii_punct(w.front())) {
      out.push_back(w.substr(0, 1));
      out.push_back(w.substr(1));
    } else {
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::u32string strip_whitespace(const std::u32string& s) {
  std::u32string out;
  for (char32_t c : s)
    if (!utf8::is_space(c)) out.push_back(c);
  return out;
}

}  // namespace

std::string tokenize_international(std::string_view text) {
  auto s = utf8::decode(text);
  auto not_number = [](char32_t c) { return !utf8::is_number(c); };
  auto punct = [](char32_t c) { return utf8::is_punctuation(c); };
  s = rewrite_pairs(s, not_number, punct, false);
  s = rewrite_pairs(s, punct, not_number, true);
  std::u32string spaced;
  for (char32_t c : s) {
    if (utf8::is_symbol(c)) {
      spaced.push_back(U' ');
      spaced.push_back(c);
      spaced.push_back(U' ');
    } else {
      spaced.push_back(c);
    }
  }
  std::string out;
  for (const auto& piece : utf8::split_whitespace(std::u32string_view(spaced))) {
    if (!out.empty()) out.push_back(' ');
    out += utf8::encode(piece);
  }
  return out;
}

BleuReport bleu4(std::span<const std::string> hypotheses,
                 std::span<const std::string> references, BleuSmoothing smoothing) {
  check_corpus(hypotheses, references);
  BleuReport report;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = utf8::split_whitespace(
        std::u32string_view(utf8::decode(tokenize_international(hypotheses[s]))));
    const auto ref = utf8::split_whitespace(
        std::u32string_view(utf8::decode(tokenize_international(references[s]))));
    report.hypothesis_length += hyp.size();
    report.reference_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto stats = match_statistics(word_ngrams(hyp, n), word_ngrams(ref, n));
      report.totals[n - 1] += stats[0];
      report.matches[n - 1] += stats[2];
    }
  }

  const double hyp_len = static_cast<double>(report.hypothesis_length);
  const double ref_len = static_cast<double>(report.reference_length);
  report.brevity_penalty = 1.0;
  if (hyp_len < ref_len) report.brevity_penalty = hyp_len > 0 ? std::exp(1.0 - ref_len / hyp_len) : 0.0;

  const bool any_match = std::any_of(report.matches.begin(), report.matches.end(),
                                     [](std::uint64_t m) { return m > 0; });
  if (!any_match) return report;

  double smooth = 1.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (report.totals[n] == 0) return report;  // undefined order: score stays 0
    const double total = static_cast<double>(report.totals[n]);
    if (report.matches[n] == 0) {
      if (smoothing == BleuSmoothing::kNone) return report;
      smooth *= 2.0;
      report.precisions[n] = 1.0 / (smooth * total);
    } else {
      report.precisions[n] = static_cast<double>(report.matches[n]) / total;
    }
    log_sum += std::log(report.precisions[n]);
  }
  report.bleu = 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

ChrfStatistics chrf_statistics(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = utf8::decode(hypothesis);
  const auto ref = utf8::decode(reference);
  ChrfStatistics stats;
  const auto hyp_chars = strip_whitespace(hyp);
  const auto ref_chars = strip_whitespace(ref);
  for (std::size_t n = 1; n <= 6; ++n)
    stats.counts[n - 1] = match_statistics(char_ngrams(hyp_chars, n), char_ngrams(ref_chars, n));
  const auto hyp_words = chrf_words(hyp);
  const auto ref_words = chrf_words(ref);
  for (std::size_t n = 1; n <= 2; ++n)
    stats.counts[5 + n] = match_statistics(word_ngrams(hyp_words, n), word_ngrams(ref_words, n));
  return stats;
}

double chrf_score(const ChrfStatistics& stats) {
  constexpr double kBetaSquared = 4.0;
  double avg_prec = 0.0, avg_rec = 0.0;
  int effective_order = 0;
  for (const auto& [n_hyp, n_ref, n_match] : stats.counts) {
    if (n_hyp > 0 && n_ref > 0) {
      avg_prec += static_cast<double>(n_match) / static_cast<double>(n_hyp);
      avg_rec += static_cast<double>(n_match) / static_cast<double>(n_ref);
      ++effective_order;
    }
  }
  if (effective_order == 0) return 0.0;
  avg_prec /= effective_order;
  avg_rec /= effective_order;
  if (avg_prec + avg_rec == 0.0) return 0.0;
  return 100.0 * (1.0 + kBetaSquared) * avg_prec * avg_rec /
         (kBetaSquared * avg_prec + avg_rec);
}

double chrf_pp(std::span<const std::string> hypotheses,
               std::span<const std::string> references) {
  check_corpus(hypotheses, references);
  ChrfStatistics total;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto stats = chrf_statistics(hypotheses[s], references[s]);
    for (std::size_t o = 0; o < total.counts.size(); ++o)
      for (std::size_t k = 0; k < 3; ++k) total.counts[o][k] += stats.counts[o][k];
  }
  return chrf_score(total);
}

CorpusStats corpus_stats_from_counts(double duration_hours, double unique_words) {
  if (!(duration_hours > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "duration must be positive");
  if (!(unique_words > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "corpus has no words");
  return {duration_hours, unique_words, duration_hours / (unique_words / 1000.0)};
}

CorpusStats corpus_stats(std::string_view corpus, double duration_hours) {
  std::set<std::string> words;
  for (auto& w : utf8::split_whitespace(corpus)) words.insert(std::move(w));
  return corpus_stats_from_counts(duration_hours, static_cast<double>(words.size()));
}

}  // namespace p2tx
