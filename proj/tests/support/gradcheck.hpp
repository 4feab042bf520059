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

// Central-difference gradient check shared by the model tests and the
// acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "p2tx/model.hpp"
#include "p2tx/rng.hpp"

namespace p2tx::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.layers = 1;
  c.heads = 2;
  c.embed_dim = 8;
  c.ffn_dim = 16;
  c.input_dim = 6;
  c.vocab_size = 11;
  c.max_positions = 64;
  return c;
}

inline FeatureSequence random_features(Rng& rng, std::uint32_t frames, std::uint32_t dim) {
  FeatureSequence f;
  f.frames = frames;
  f.dim = dim;
  for (std::size_t i = 0; i < std::size_t{frames} * dim; ++i)
    f.values.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
  f.frame_mask.assign(frames, 1);
  return f;
}

// Glorot initialization plus N(0, 0.1) noise on every scalar, so no tensor
// sits at a special point such as zero biases or unit gains.
inline Parameters<double> random_parameters(const ModelConfig& config, Rng& rng) {
  auto p = init_parameters<double>(config, rng.next_u64());
  for (auto& [name, m] : p.tensors())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += rng.normal(0.0, 0.1);
  return p;
}

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU kink
  double max_rel_error = 0.0;
};

// Signs of every ReLU input, encoder then decoder. Central differences are
// only meaningful when x - h, x and x + h share this pattern.
template <class T>
std::vector<bool> relu_pattern(const ForwardCache<T>& cache) {
  std::vector<bool> out;
  auto add = [&](const Matrix<T>& activated) {
    for (Eigen::Index i = 0; i < activated.size(); ++i) out.push_back(activated.data()[i] > 0);
  };
  for (const auto& l : cache.encoder) add(l.ffn.activated);
  for (const auto& l : cache.decoder) add(l.ffn.activated);
  return out;
}

// Loss = sum(weights .* logits). Relative error is
// |analytic - numeric| / max(|analytic| + |numeric|, floor). Scalars whose
// perturbation flips a ReLU are redrawn, so `samples` checks are always made.
inline GradCheckResult gradient_check(const Parameters<double>& params,
                                      const FeatureSequence& src,
                                      const TokenSequence& tgt, std::size_t samples,
                                      std::uint64_t seed, double h = 1e-3,
                                      double floor = 1e-6) {
  Rng rng(seed);
  const auto fwd = forward(params, src, tgt, false);
  Matrix<double> weights(fwd.logits.rows(), fwd.logits.cols());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.normal();
  const auto grads = backward(params, fwd.cache, weights);

  const auto pattern = relu_pattern(fwd.cache);
  bool crossed = false;
  auto loss = [&](const Parameters<double>& p) {
    const auto r = forward(p, src, tgt, false);
    crossed = crossed || relu_pattern(r.cache) != pattern;
    return (r.logits.array() * weights.array()).sum();
  };

  Parameters<double> probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = grads.tensors();
  std::vector<std::pair<std::size_t, Eigen::Index>> slots;
  for (std::size_t t = 0; t < probe_tensors.size(); ++t)
    for (Eigen::Index i = 0; i < probe_tensors[t].second->size(); ++i) slots.emplace_back(t, i);

  GradCheckResult result;
  while (result.checked < samples) {
    const auto [t, i] = slots[rng.below(slots.size())];
    crossed = false;
    double& x = probe_tensors[t].second->data()[i];
    const double saved = x;
    x = saved + h;
    const double up = loss(probe);
    x = saved - h;
    const double down = loss(probe);
    x = saved;
    if (crossed) {
      ++result.skipped;
      continue;
    }
    const double numeric = (up - down) / (2 * h);
    const double analytic = grad_tensors[t].second->data()[i];
    const double rel =
        std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace p2tx::testing
