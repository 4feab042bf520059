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

#include "p2tx/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "p2tx/byte_io.hpp"
#include "p2tx/error.hpp"
#include "p2tx/utf8.hpp"

namespace p2tx {
namespace {

struct Slot {
  std::vector<std::string> options;  // one entry for literal text
};

std::vector<Slot> parse_template(std::string_view tmpl) {
  std::vector<Slot> slots;
  std::string literal;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c == '}') throw Error(ErrorCode::kInvalidArgument, "unbalanced '}' in template");
    if (c != '{') {
      literal.push_back(c);
      ++i;
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos)
      throw Error(ErrorCode::kInvalidArgument, "unbalanced '{' in template");
    const auto body = tmpl.substr(i + 1, close - i - 1);
    if (body.find('{') != std::string_view::npos)
      throw Error(ErrorCode::kInvalidArgument, "nested '{' in template");
    if (!literal.empty()) slots.push_back({{std::move(literal)}});
    literal.clear();
    Slot slot;
    std::size_t start = 0;
    while (true) {
      const auto bar = body.find('|', start);
      auto option = std::string(body.substr(start, bar - start));
      if (option.empty()) throw Error(ErrorCode::kInvalidArgument, "empty template alternative");
      slot.options.push_back(std::move(option));
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
    slots.push_back(std::move(slot));
    i = close + 1;
  }
  if (!literal.empty()) slots.push_back({{std::move(literal)}});
  return slots;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
  double amplitude, frequency, phase;
};

// Word-keyed waves for every (keypoint, coordinate) track.
std::vector<std::vector<Wave>> word_waves(std::string_view word, std::uint32_t tracks) {
  Rng rng(fnv1a64(word));
  std::vector<std::vector<Wave>> waves(tracks);
  for (auto& track : waves) {
    const int terms = 2 + static_cast<int>(rng.below(2));
    double budget = 0.32;
    for (int j = 0; j < terms; ++j) {
      const double a = rng.uniform(0.3, 0.6) * budget;
      budget -= a;
      track.push_back({a, rng.uniform(0.5, 2.5), rng.uniform(0.0, kTwoPi)});
    }
  }
  return waves;
}

}  // namespace

std::vector<std::string> SynthSpec::problems() const {
  std::vector<std::string> out;
  if (pairs < 1) out.push_back("pairs must be >= 1");
  if (min_frames < 1) out.push_back("min_frames must be >= 1");
  if (max_frames < min_frames) out.push_back("max_frames must be >= min_frames");
  if (keypoints < 1) out.push_back("keypoints must be >= 1");
  if (dims != 2 && dims != 3) out.push_back("dims must be 2 or 3");
  if (!fps.valid()) out.push_back("fps must be positive");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) out.push_back("jitter must be finite and >= 0");
  for (const auto& t : templates) {
    try {
      if (utf8::split_whitespace(std::string_view(t)).empty())
        out.push_back("template has no words: '" + t + "'");
      else
        parse_template(t);
    } catch (const Error& e) {
      out.push_back(std::string(e.what()) + ": '" + t + "'");
    }
  }
  return out;
}

void SynthSpec::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid synthetic spec:";
  for (const auto& s : p) msg += "\n  " + s;
  throw Error(ErrorCode::kInvalidArgument, msg);
}

std::vector<std::string> default_templates() {
  return {
      "{der|ein} {Hund|Vogel|Mann} {läuft|schläft|singt} {heute|morgen}",
      "{morgen|heute} {regnet|schneit} es in {Bern|Zürich|Basel}",
      "die {Sonne|Wolke} {scheint|zieht} über {die Berge|den See}",
      "wir {fahren|gehen} {nach Hause|in die Schweiz}",
  };
}

std::string fill_template(std::string_view tmpl, Rng& rng) {
  std::string out;
  for (const auto& slot : parse_template(tmpl)) {
    const auto pick = slot.options.size() == 1 ? 0 : rng.below(slot.options.size());
    out += slot.options[pick];
  }
  std::string normalized;
  for (const auto& w : utf8::split_whitespace(std::string_view(out))) {
    if (!normalized.empty()) normalized.push_back(' ');
    normalized += w;
  }
  return normalized;
}

std::vector<std::string> template_vocabulary(const std::vector<std::string>& templates) {
  std::set<std::string> words;
  for (const auto& t : templates) {
    for (const auto& slot : parse_template(t)) {
      for (const auto& option : slot.options) {
        for (auto& w : utf8::split_whitespace(std::string_view(option))) words.insert(w);
      }
    }
  }
  return {words.begin(), words.end()};
}

std::vector<ComponentRange> synthetic_components(std::uint32_t keypoints) {
  const std::uint32_t hand = keypoints >= 3 ? keypoints / 4 : 0;
  if (hand == 0) return {{"body", 0, keypoints}};
  const std::uint32_t body = keypoints - 2 * hand;
  return {{"body", 0, body}, {"left-hand", body, body + hand}, {"right-hand", body + hand, keypoints}};
}

PoseSequence synthesize_pose(const SynthSpec& spec, std::string_view sentence) {
  const auto words = utf8::split_whitespace(sentence);
  if (words.empty()) throw Error(ErrorCode::kInvalidArgument, "sentence has no words");
  const std::uint32_t span = spec.max_frames - spec.min_frames + 1;
  const std::uint32_t frames = std::max<std::uint32_t>(
      spec.min_frames + static_cast<std::uint32_t>(fnv1a64(sentence) % span),
      static_cast<std::uint32_t>(words.size()));
  PoseSequence pose(spec.fps, frames, spec.keypoints, spec.dims,
                    synthetic_components(spec.keypoints));
  const std::uint32_t tracks = spec.keypoints * spec.dims;
  const std::size_t n = words.size();
  for (std::size_t w = 0; w < n; ++w) {
    const auto waves = word_waves(words[w], tracks);
    const auto begin = static_cast<std::uint32_t>(w * frames / n);
    const auto end = static_cast<std::uint32_t>((w + 1) * frames / n);
    for (std::uint32_t t = begin; t < end; ++t) {
      const double u = static_cast<double>(t - begin) / static_cast<double>(end - begin);
      for (std::uint32_t k = 0; k < spec.keypoints; ++k) {
        for (std::uint32_t c = 0; c < spec.dims; ++c) {
          double v = 0.5;
          for (const auto& wave : waves[k * spec.dims + c])
            v += wave.amplitude * std::sin(kTwoPi * wave.frequency * u + wave.phase);
          pose.coord(t, k, c) = static_cast<float>(v);
        }
      }
    }
  }
  return pose;
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  const auto templates = spec.templates.empty() ? default_templates() : spec.templates;
  Rng rng(spec.seed);
  SynthCorpus corpus;
  corpus.poses.reserve(spec.pairs);
  corpus.sentences.reserve(spec.pairs);
  for (std::uint32_t i = 0; i < spec.pairs; ++i) {
    const auto& tmpl = templates[rng.below(templates.size())];
    auto sentence = fill_template(tmpl, rng);
    auto pose = synthesize_pose(spec, sentence);
    if (spec.jitter > 0.0) {
      for (float& v : pose.coords()) {
        const double jittered = static_cast<double>(v) + rng.normal(0.0, spec.jitter);
        v = static_cast<float>(std::clamp(jittered, 0.0, 1.0));
      }
    }
    corpus.poses.push_back(std::move(pose));
    corpus.sentences.push_back(std::move(sentence));
  }
  return corpus;
}

}  // namespace p2tx
