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

#include "p2tx/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "p2tx/byte_io.hpp"
#include "p2tx/error.hpp"
#include "p2tx/utf8.hpp"

namespace p2tx {
namespace {

constexpr std::string_view kSpecialTokens[kNumSpecials] = {"<pad>", "<s>", "</s>",
                                                           "<unk>"};
constexpr std::string_view kVocabHeader = "P2TX-VOCAB v1";

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (std::uint64_t{a} << 32) | b;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

// Word -> frequency over all corpora, ordered for determinism.
std::map<std::u32string, std::int64_t> count_words(std::span<const std::string> corpora) {
  std::map<std::u32string, std::int64_t> words;
  for (const auto& corpus : corpora) {
    for (auto& w : utf8::split_whitespace(std::u32string_view(utf8::decode(corpus))))
      ++words[w];
  }
  return words;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary({kSpecialTokens, kSpecialTokens + kNumSpecials}, {}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<MergeRule> merges)
    : tokens_(std::move(tokens)), merges_(std::move(merges)) {
  if (tokens_.size() < kNumSpecials)
    throw Error(ErrorCode::kFormat, "vocabulary is missing special tokens");
  for (std::uint32_t i = 0; i < tokens_.size(); ++i) {
    const auto& tok = tokens_[i];
    if (tok.empty()) throw Error(ErrorCode::kFormat, "empty token at id " + std::to_string(i));
    if (tok.find_first_of("\t\n\r") != std::string::npos)
      throw Error(ErrorCode::kFormat, "token with control whitespace at id " + std::to_string(i));
    if (i < kNumSpecials && tok != kSpecialTokens[i])
      throw Error(ErrorCode::kFormat, "id " + std::to_string(i) + " must be " +
                                          std::string(kSpecialTokens[i]));
    if (!index_.emplace(tok, i).second)
      throw Error(ErrorCode::kFormat, "duplicate token '" + tok + "'");
  }
  for (std::uint32_t r = 0; r < merges_.size(); ++r) {
    const auto& m = merges_[r];
    const auto l = id_of(m.left), rt = id_of(m.right), res = id_of(m.result);
    if (!l || !rt || !res || *l < kNumSpecials || *rt < kNumSpecials)
      throw Error(ErrorCode::kFormat, "merge " + std::to_string(r) +
                                          " refers to a token not in the vocabulary");
    if (m.left + m.right != m.result)
      throw Error(ErrorCode::kFormat, "merge " + std::to_string(r) +
                                          " result is not left+right");
    // A repeated pair can never fire again; keep the earliest rank.
    merge_index_.emplace(pair_key(*l, *rt), std::pair{r, *res});
  }
}

std::optional<std::uint32_t> Vocabulary::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> Vocabulary::merge_for(
    std::uint32_t left, std::uint32_t right) const {
  const auto it = merge_index_.find(pair_key(left, right));
  if (it == merge_index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  out += kVocabHeader;
  out += " size=" + std::to_string(tokens_.size());
  out += " merges=" + std::to_string(merges_.size()) + "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    out += std::to_string(i) + "\t" + tokens_[i] + "\n";
  for (const auto& m : merges_) out += m.left + "\t" + m.right + "\t" + m.result + "\n";
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      lines.emplace_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  if (lines.empty() || !lines[0].starts_with(kVocabHeader))
    throw Error(ErrorCode::kFormat, "not a vocabulary file (bad header)");
  std::size_t size = 0, nmerges = 0;
  if (std::sscanf(lines[0].c_str(), "P2TX-VOCAB v1 size=%zu merges=%zu", &size, &nmerges) != 2)
    throw Error(ErrorCode::kFormat, "malformed vocabulary header: " + lines[0]);
  if (lines.size() < 1 + size + nmerges)
    throw Error(ErrorCode::kTruncated, "vocabulary file shorter than its header declares");
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const auto fields = split_tabs(lines[1 + i]);
    std::size_t id = 0;
    const auto& f0 = fields[0];
    if (fields.size() != 2 ||
        std::from_chars(f0.data(), f0.data() + f0.size(), id).ec != std::errc{} || id != i)
      throw Error(ErrorCode::kFormat, "bad token line " + std::to_string(i + 2));
    tokens.push_back(fields[1]);
  }
  std::vector<MergeRule> merges;
  merges.reserve(nmerges);
  for (std::size_t i = 0; i < nmerges; ++i) {
    auto fields = split_tabs(lines[1 + size + i]);
    if (fields.size() != 3)
      throw Error(ErrorCode::kFormat, "bad merge line " + std::to_string(size + i + 2));
    merges.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
  }
  for (std::size_t i = 1 + size + nmerges; i < lines.size(); ++i) {
    if (!lines[i].empty())
      throw Error(ErrorCode::kFormat, "unexpected content after merges");
  }
  return Vocabulary(std::move(tokens), std::move(merges));
}

std::uint64_t Vocabulary::hash() const { return fnv1a64(serialize()); }

std::string format_hash(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::size_t character_inventory_size(std::span<const std::string> corpora) {
  std::set<char32_t> chars;
  for (const auto& [word, count] : count_words(corpora))
    chars.insert(word.begin(), word.end());
  chars.insert(U'▁');
  return chars.size();
}

Vocabulary train_vocab(std::span<const std::string> corpora, std::size_t vocab_size) {
  if (corpora.empty()) throw Error(ErrorCode::kInvalidArgument, "no training corpora");
  const auto word_counts = count_words(corpora);

  std::set<char32_t> chars{U'▁'};
  for (const auto& [word, count] : word_counts) chars.insert(word.begin(), word.end());
  if (vocab_size < chars.size() + kNumSpecials) {
    throw Error(ErrorCode::kInvalidArgument,
                "vocab_size " + std::to_string(vocab_size) + " is below the " +
                    std::to_string(chars.size()) + " base symbols plus " +
                    std::to_string(kNumSpecials) + " specials");
  }

  std::vector<std::string> tokens(kSpecialTokens, kSpecialTokens + kNumSpecials);
  std::unordered_map<std::string, std::uint32_t> index;
  auto add_token = [&](std::string s) {
    const auto [it, inserted] = index.emplace(s, static_cast<std::uint32_t>(tokens.size()));
    if (inserted) tokens.push_back(std::move(s));
    return it->second;
  };
  std::unordered_map<char32_t, std::uint32_t> char_id;
  for (char32_t c : chars) char_id[c] = add_token(utf8::encode(c));

  struct Word {
    std::vector<std::uint32_t> symbols;
    std::int64_t freq;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [w, freq] : word_counts) {
    Word word{{char_id[U'▁']}, freq};
    for (char32_t c : w) word.symbols.push_back(char_id[c]);
    words.push_back(std::move(word));
  }

  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;
  auto account = [&](std::uint32_t wi, std::int64_t sign) {
    const auto& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
      const auto key = pair_key(w.symbols[i], w.symbols[i + 1]);
      auto& count = pair_counts[key];
      count += sign * w.freq;
      if (sign > 0) pair_words[key].push_back(wi);
    }
  };
  for (std::uint32_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  std::vector<MergeRule> merges;
  while (tokens.size() < vocab_size) {
    std::uint64_t best = 0;
    std::int64_t best_count = 0;
    std::string best_merged;
    for (const auto& [key, count] : pair_counts) {
      if (count < 2 || count < best_count) continue;
      const auto& l = tokens[key >> 32];
      const auto& r = tokens[key & 0xFFFFFFFFu];
      if (count == best_count) {
        const std::string merged = l + r;
        if (merged > best_merged) continue;
        if (merged == best_merged && l >= tokens[best >> 32]) continue;
        best_merged = merged;
      } else {
        best_merged = l + r;
      }
      best = key;
      best_count = count;
    }
    if (best_count < 2) break;

    const auto left = static_cast<std::uint32_t>(best >> 32);
    const auto right = static_cast<std::uint32_t>(best & 0xFFFFFFFFu);
    const auto merged = add_token(best_merged);
    merges.push_back({tokens[left], tokens[right], best_merged});

    auto affected = std::move(pair_words[best]);
    pair_words.erase(best);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (auto wi : affected) {
      auto& syms = words[wi].symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size() && !present; ++i)
        present = syms[i] == left && syms[i + 1] == right;
      if (!present) continue;
      account(wi, -1);
      std::vector<std::uint32_t> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
      account(wi, +1);
    }
    std::erase_if(pair_counts, [](const auto& kv) { return kv.second == 0; });
  }
  return Vocabulary(std::move(tokens), std::move(merges));
}

TokenSequence encode(const Vocabulary& vocab, std::string_view text) {
  TokenSequence out;
  const auto marker = vocab.id_of(kWordBoundary);
  for (const auto& word : utf8::split_whitespace(std::u32string_view(utf8::decode(text)))) {
    std::vector<std::uint32_t> syms;
    syms.push_back(marker.value_or(kUnkId));
    for (char32_t c : word) syms.push_back(vocab.id_of(utf8::encode(c)).value_or(kUnkId));
    while (syms.size() > 1) {
      std::uint32_t best_rank = UINT32_MAX, best_left = 0, best_right = 0, result = 0;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const auto m = vocab.merge_for(syms[i], syms[i + 1]);
        if (m && m->first < best_rank) {
          best_rank = m->first;
          best_left = syms[i];
          best_right = syms[i + 1];
          result = m->second;
        }
      }
      if (best_rank == UINT32_MAX) break;
      std::size_t w = 0;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == best_left && syms[i + 1] == best_right) {
          syms[w++] = result;
          i += 2;
        } else {
          syms[w++] = syms[i++];
        }
      }
      syms.resize(w);
    }
    out.ids.insert(out.ids.end(), syms.begin(), syms.end());
  }
  return out;
}

std::string decode(const Vocabulary& vocab, const TokenSequence& tokens) {
  std::string joined;
  for (auto id : tokens.ids) {
    if (id >= vocab.size())
      throw Error(ErrorCode::kOutOfRange, "token id " + std::to_string(id) +
                                              " outside vocabulary of size " +
                                              std::to_string(vocab.size()));
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    if (id == kUnkId) {
      joined += "\xEF\xBF\xBD";
      continue;
    }
    joined += vocab.token(id);
  }
  std::string out;
  out.reserve(joined.size());
  std::size_t pos = 0;
  while (pos < joined.size()) {
    if (joined.compare(pos, kWordBoundary.size(), kWordBoundary) == 0) {
      if (!out.empty()) out.push_back(' ');
      pos += kWordBoundary.size();
    } else {
      out.push_back(joined[pos++]);
    }
  }
  return out;
}

}  // namespace p2tx
