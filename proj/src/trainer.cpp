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

#include "p2tx/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "p2tx/error.hpp"
#include "p2tx/metrics.hpp"

namespace p2tx {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.98;
constexpr double kAdamEps = 1e-9;

void check_same_structure(const ModelConfig& a, const ModelConfig& b, const std::string& what) {
  ModelConfig x = a, y = b;
  x.dropout = y.dropout = 0.0;
  if (x == y) return;
  auto describe = [](const ModelConfig& c) {
    return "L=" + std::to_string(c.layers) + " H=" + std::to_string(c.heads) +
           " d_ff=" + std::to_string(c.ffn_dim) + " d_model=" + std::to_string(c.embed_dim) +
           " D=" + std::to_string(c.input_dim) + " V=" + std::to_string(c.vocab_size) +
           " max_positions=" + std::to_string(c.max_positions);
  };
  throw Error(ErrorCode::kConfigMismatch, what + ": " + describe(a) + " vs " + describe(b));
}

// Copies tensors into parameters shaped by `config` (which may differ in
// dropout only).
Parameters<float> rebind(const Parameters<float>& src, const ModelConfig& config) {
  Parameters<float> out(config);
  auto dst = out.tensors();
  const auto from = src.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].second = *from[i].second;
  return out;
}

FeatureSequence capped_features(const PoseSequence& pose, const Dataset& data,
                                std::uint32_t cap, const TrainingHooks& hooks, bool warn) {
  auto features = flatten(pose, data.components);
  if (features.frames > cap) {
    if (warn && hooks.on_warning)
      hooks.on_warning("source of " + std::to_string(features.frames) +
                       " frames truncated to " + std::to_string(cap));
    features.frames = cap;
    features.values.resize(std::size_t{cap} * features.dim);
    features.frame_mask.resize(cap);
  }
  return features;
}

void check_dataset(const Dataset& d, const char* name) {
  if (d.poses.size() != d.sentences.size())
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + " set has " + std::to_string(d.poses.size()) +
                    " poses but " + std::to_string(d.sentences.size()) + " sentences");
  if (d.poses.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " set is empty");
}

// Batches of indices: shuffle, stable-sort by source length, chunk, shuffle
// the chunks.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::uint32_t>& lengths,
                                                   std::uint32_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(order.size(), i + batch_size)));
  rng.shuffle(batches);
  return batches;
}

}  // namespace

std::vector<std::string> TrainingConfig::problems() const {
  std::vector<std::string> out;
  if (batch_size < 1) out.push_back("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    out.push_back("learning_rate must be finite and > 0");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    out.push_back("label_smoothing must be in [0, 1)");
  if (!std::isfinite(clip_norm)) out.push_back("clip_norm must be finite");
  if (eval_every < 1) out.push_back("eval_every must be >= 1");
  if (patience < 1) out.push_back("patience must be >= 1");
  if (max_source_frames < 1) out.push_back("max_source_frames must be >= 1");
  if (augmentation && !(augmentation->sigma >= 0.0 && std::isfinite(augmentation->sigma)))
    out.push_back("augmentation sigma must be finite and >= 0");
  for (auto& p : dev_decode.problems()) out.push_back("dev decode: " + p);
  return out;
}

void TrainingConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid training config:";
  for (const auto& s : p) msg += "\n  " + s;
  throw Error(ErrorCode::kInvalidArgument, msg);
}

AdamState::AdamState(const ModelConfig& config) : m(config), v(config) {
  m.set_zero();
  v.set_zero();
}

double learning_rate_at(const TrainingConfig& config, std::uint64_t step) {
  const double s = static_cast<double>(std::max<std::uint64_t>(step, 1));
  if (config.warmup_updates == 0) return config.learning_rate;
  const double w = static_cast<double>(config.warmup_updates);
  return config.learning_rate * std::min(s / w, std::sqrt(w / s));
}

LossResult smoothed_cross_entropy(const Matrix<float>& logits,
                                  const std::vector<std::uint32_t>& labels, double smoothing) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw Error(ErrorCode::kDimensionMismatch, "logit rows != label count");
  const auto v = logits.cols();
  const double off = smoothing / static_cast<double>(v);
  LossResult out;
  out.dlogits.resize(logits.rows(), v);
  std::vector<double> p(static_cast<std::size_t>(v));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto y = labels[static_cast<std::size_t>(r)];
    if (y >= v) throw Error(ErrorCode::kOutOfRange, "label id out of range");
    double max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < v; ++k) max = std::max(max, static_cast<double>(logits(r, k)));
    double sum = 0.0;
    for (Eigen::Index k = 0; k < v; ++k) sum += std::exp(static_cast<double>(logits(r, k)) - max);
    const double log_z = max + std::log(sum);
    for (Eigen::Index k = 0; k < v; ++k) {
      const double log_p = static_cast<double>(logits(r, k)) - log_z;
      const double q = off + (k == y ? 1.0 - smoothing : 0.0);
      out.loss -= q * log_p;
      if (k == y) out.nll -= log_p;
      out.dlogits(r, k) = static_cast<float>(std::exp(log_p) - q);
    }
  }
  return out;
}

double global_norm(const Parameters<float>& grads) {
  double sq = 0.0;
  for (const auto& [name, m] : grads.tensors())
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const double g = m->data()[i];
      sq += g * g;
    }
  return std::sqrt(sq);
}

double clip_gradients(Parameters<float>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (auto& [name, m] : grads.tensors()) *m *= scale;
  }
  return norm;
}

StepResult train_step(Parameters<float>& params, std::span<const TrainingExample> batch,
                      const TrainingConfig& config, AdamState& optimizer, Rng& rng) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  const auto& mc = params.config();
  Parameters<float> grads(mc);
  grads.set_zero();
  StepResult result;
  double loss = 0.0, nll = 0.0;
  std::vector<LossResult> losses;
  std::vector<ForwardCache<float>> caches;
  for (const auto& ex : batch) {
    TokenSequence in{{kBosId}};
    in.ids.insert(in.ids.end(), ex.target.ids.begin(), ex.target.ids.end());
    auto labels = ex.target.ids;
    labels.push_back(kEosId);
    auto fwd = forward(params, ex.source, in, true, &rng);
    auto l = smoothed_cross_entropy(fwd.logits, labels, config.label_smoothing);
    loss += l.loss;
    nll += l.nll;
    result.tokens += labels.size();
    losses.push_back(std::move(l));
    caches.push_back(std::move(fwd.cache));
  }
  const double tokens = static_cast<double>(result.tokens);
  result.loss = loss / tokens;
  result.nll = nll / tokens;
  if (!std::isfinite(result.loss))
    throw Error(ErrorCode::kNonFinite,
                "non-finite loss at update " + std::to_string(optimizer.step + 1));
  for (std::size_t i = 0; i < caches.size(); ++i) {
    losses[i].dlogits /= static_cast<float>(tokens);
    backward_accumulate(params, caches[i], losses[i].dlogits, grads);
  }
  result.grad_norm = clip_gradients(grads, config.clip_norm);
  if (!std::isfinite(result.grad_norm))
    throw Error(ErrorCode::kNonFinite,
                "non-finite gradient at update " + std::to_string(optimizer.step + 1));

  ++optimizer.step;
  const double lr = learning_rate_at(config, optimizer.step);
  result.learning_rate = lr;
  const double t = static_cast<double>(optimizer.step);
  const double bc1 = 1.0 - std::pow(kBeta1, t);
  const double bc2 = 1.0 - std::pow(kBeta2, t);
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = optimizer.m.tensors();
  auto v = optimizer.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    float* pd = p[i].second->data();
    const float* gd = g[i].second->data();
    float* md = m[i].second->data();
    float* vd = v[i].second->data();
    for (Eigen::Index j = 0; j < p[i].second->size(); ++j) {
      const double gj = gd[j];
      const double mj = kBeta1 * md[j] + (1.0 - kBeta1) * gj;
      const double vj = kBeta2 * vd[j] + (1.0 - kBeta2) * gj * gj;
      md[j] = static_cast<float>(mj);
      vd[j] = static_cast<float>(vj);
      pd[j] = static_cast<float>(pd[j] - lr * (mj / bc1) / (std::sqrt(vj / bc2) + kAdamEps));
    }
  }
  return result;
}

std::string to_json_line(const TrainingLogEntry& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["update"] = e.update;
  j["loss"] = e.loss;
  j["nll"] = e.nll;
  j["lr"] = e.learning_rate;
  if (e.dev_bleu) j["dev_bleu"] = *e.dev_bleu;
  j["wall_seconds"] = e.wall_seconds;
  return j.dump();
}

double dev_bleu(const Parameters<float>& params, const Vocabulary& vocab,
                const Dataset& dev_set, const DecodeConfig& decode) {
  check_dataset(dev_set, "dev");
  std::vector<std::string> hyps;
  hyps.reserve(dev_set.poses.size());
  for (const auto& pose : dev_set.poses) {
    auto features = flatten(pose, dev_set.components);
    if (features.frames > params.config().max_positions) {
      features.frames = params.config().max_positions;
      features.values.resize(std::size_t{features.frames} * features.dim);
      features.frame_mask.resize(features.frames);
    }
    hyps.push_back(translate(params, vocab, features, decode).text);
  }
  return bleu4(hyps, dev_set.sentences, BleuSmoothing::kExp).bleu;
}

TrainingResult train(const ModelConfig& model_config, const Vocabulary& vocab,
                     const Dataset& train_set, const Dataset& dev_set,
                     const TrainingConfig& config, const TrainingHooks& hooks) {
  model_config.validate();
  config.validate();
  check_dataset(train_set, "training");
  if (!hooks.evaluator) check_dataset(dev_set, "dev");
  if (vocab.size() != model_config.vocab_size)
    throw Error(ErrorCode::kVocabMismatch,
                "vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                    std::to_string(model_config.vocab_size));
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const std::uint64_t vocab_hash = vocab.hash();

  std::optional<Parameters<float>> initial;
  if (!config.pretrained.empty()) {
    const auto ckpt = read_checkpoint_file(config.pretrained);
    if (ckpt.vocab_hash != vocab_hash)
      throw Error(ErrorCode::kVocabMismatch,
                  "pretrained checkpoint vocabulary " + format_hash(ckpt.vocab_hash) +
                      " does not match run vocabulary " + format_hash(vocab_hash));
    check_same_structure(ckpt.config(), model_config, "pretrained checkpoint config mismatch");
    initial = rebind(ckpt.params, model_config);
  }
  Parameters<float> params =
      initial ? std::move(*initial) : init_parameters<float>(model_config, config.seed);

  // Fixed per-example data when no augmentation is drawn.
  const std::uint32_t cap = std::min(config.max_source_frames, model_config.max_positions);
  std::vector<TokenSequence> targets;
  std::vector<std::uint32_t> lengths;
  std::vector<FeatureSequence> features;
  for (std::size_t i = 0; i < train_set.poses.size(); ++i) {
    targets.push_back(encode(vocab, train_set.sentences[i]));
    if (targets.back().ids.size() + 1 > model_config.max_positions)
      throw Error(ErrorCode::kOutOfRange,
                  "training sentence " + std::to_string(i) + " exceeds max_positions");
    features.push_back(capped_features(train_set.poses[i], train_set, cap, hooks, true));
    if (features.back().dim != model_config.input_dim)
      throw Error(ErrorCode::kDimensionMismatch,
                  "feature width " + std::to_string(features.back().dim) +
                      " != model input_dim " + std::to_string(model_config.input_dim));
    lengths.push_back(features.back().frames);
  }

  Rng order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng dropout_rng(config.seed ^ 0xbf58476d1ce4e5b9ULL);
  std::optional<Rng> augment_rng;
  if (config.augmentation) augment_rng.emplace(config.augmentation->seed);
  AdamState optimizer(model_config);

  TrainingResult result;
  double best = -1.0;
  std::uint32_t stale = 0;
  auto evaluate = [&](std::uint32_t epoch, TrainingLogEntry& entry) {
    const double score = hooks.evaluator ? hooks.evaluator(params)
                                         : dev_bleu(params, vocab, dev_set, config.dev_decode);
    ++result.evaluations;
    entry.dev_bleu = score;
    Checkpoint snap{params, optimizer.step, epoch, score, vocab_hash};
    result.checkpoints.push_back(std::move(snap));
    if (score > best) {
      best = score;
      stale = 0;
    } else {
      ++stale;
    }
  };
  auto emit = [&](TrainingLogEntry entry) {
    entry.wall_seconds = elapsed();
    if (hooks.on_log) hooks.on_log(entry);
    result.log.push_back(std::move(entry));
  };

  if (!config.pretrained.empty()) {
    TrainingLogEntry entry;
    evaluate(0, entry);
    emit(entry);
  }

  std::vector<TrainingExample> batch;
  for (std::uint32_t epoch = 1; epoch <= config.max_epochs && stale < config.patience; ++epoch) {
    double loss_sum = 0.0, nll_sum = 0.0;
    std::uint64_t token_sum = 0;
    double lr = 0.0;
    for (const auto& indices : make_batches(lengths, config.batch_size, order_rng)) {
      batch.clear();
      for (auto i : indices) {
        if (augment_rng) {
          const auto params_i = sample_params(*config.augmentation, *augment_rng);
          const auto pose = apply(train_set.poses[i], params_i, config.augmentation->center);
          batch.push_back({capped_features(pose, train_set, cap, hooks, false), targets[i]});
        } else {
          batch.push_back({features[i], targets[i]});
        }
      }
      const auto step = train_step(params, batch, config, optimizer, dropout_rng);
      loss_sum += step.loss * static_cast<double>(step.tokens);
      nll_sum += step.nll * static_cast<double>(step.tokens);
      token_sum += step.tokens;
      lr = step.learning_rate;
    }
    TrainingLogEntry entry;
    entry.epoch = epoch;
    entry.update = optimizer.step;
    entry.loss = loss_sum / static_cast<double>(token_sum);
    entry.nll = nll_sum / static_cast<double>(token_sum);
    entry.learning_rate = lr;
    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) evaluate(epoch, entry);
    emit(entry);
  }

  std::stable_sort(result.checkpoints.begin(), result.checkpoints.end(),
                   [](const Checkpoint& a, const Checkpoint& b) {
                     if (*a.dev_bleu != *b.dev_bleu) return *a.dev_bleu > *b.dev_bleu;
                     return a.epoch > b.epoch;
                   });
  return result;
}

Checkpoint average_checkpoints(std::span<const Checkpoint> checkpoints) {
  if (checkpoints.empty())
    throw Error(ErrorCode::kInvalidArgument, "no checkpoints to average");
  const auto& first = checkpoints.front();
  for (const auto& c : checkpoints) {
    if (!(c.config() == first.config()))
      throw Error(ErrorCode::kConfigMismatch, "checkpoints have different model configs");
    if (c.vocab_hash != first.vocab_hash)
      throw Error(ErrorCode::kVocabMismatch,
                  "checkpoint vocabularies differ: " + format_hash(first.vocab_hash) + " vs " +
                      format_hash(c.vocab_hash));
  }
  Checkpoint out{Parameters<float>(first.config()), 0, 0, std::nullopt, first.vocab_hash};
  auto dst = out.params.tensors();
  std::vector<std::vector<std::pair<std::string, const Matrix<float>*>>> src;
  for (const auto& c : checkpoints) src.push_back(c.params.tensors());
  const double n = static_cast<double>(checkpoints.size());
  for (std::size_t t = 0; t < dst.size(); ++t) {
    auto& target = *dst[t].second;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      double sum = 0.0;
      for (const auto& s : src) sum += static_cast<double>(s[t].second->data()[i]);
      target.data()[i] = static_cast<float>(sum / n);
    }
  }
  for (const auto& c : checkpoints) {
    out.updates = std::max(out.updates, c.updates);
    out.epoch = std::max(out.epoch, c.epoch);
  }
  return out;
}

std::vector<Checkpoint> select_best(std::span<const Checkpoint> checkpoints, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  std::vector<const Checkpoint*> scored;
  for (const auto& c : checkpoints)
    if (c.dev_bleu) scored.push_back(&c);
  if (scored.size() < n)
    throw Error(ErrorCode::kInvalidArgument,
                "need " + std::to_string(n) + " scored checkpoints, have " +
                    std::to_string(scored.size()));
  std::stable_sort(scored.begin(), scored.end(), [](const Checkpoint* a, const Checkpoint* b) {
    if (*a->dev_bleu != *b->dev_bleu) return *a->dev_bleu > *b->dev_bleu;
    return a->epoch > b->epoch;
  });
  std::vector<Checkpoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(*scored[i]);
  return out;
}

}  // namespace p2tx
