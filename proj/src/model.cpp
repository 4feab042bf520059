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

#include "p2tx/model.hpp"

#include <cmath>
#include <limits>
#include <type_traits>

#include "p2tx/error.hpp"

namespace p2tx {

// ---- configuration --------------------------------------------------------

std::vector<std::string> ModelConfig::problems() const {
  std::vector<std::string> out;
  if (layers < 1) out.push_back("layers must be >= 1");
  if (heads < 1) out.push_back("heads must be >= 1");
  if (ffn_dim < 1) out.push_back("ffn_dim must be >= 1");
  if (embed_dim < 1) out.push_back("embed_dim must be >= 1");
  if (heads >= 1 && embed_dim % heads != 0)
    out.push_back("embed_dim (" + std::to_string(embed_dim) +
                  ") must be divisible by heads (" + std::to_string(heads) + ")");
  if (input_dim < 1) out.push_back("input_dim must be >= 1");
  if (vocab_size <= kNumSpecials) out.push_back("vocab_size must exceed the special tokens");
  if (max_positions < 1) out.push_back("max_positions must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) out.push_back("dropout must be in [0, 1)");
  return out;
}

void ModelConfig::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& p : issues) msg += " " + p + ";";
  throw Error(ErrorCode::kInvalidArgument, msg);
}

ModelConfig small_config(std::uint32_t input_dim, std::uint32_t vocab_size) {
  ModelConfig c;
  c.layers = 3;
  c.heads = 4;
  c.ffn_dim = 1024;
  c.embed_dim = 256;
  c.input_dim = input_dim;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig baseline_config(std::uint32_t input_dim, std::uint32_t vocab_size) {
  ModelConfig c;
  c.layers = 6;
  c.heads = 8;
  c.ffn_dim = 2048;
  c.embed_dim = 512;
  c.input_dim = input_dim;
  c.vocab_size = vocab_size;
  return c;
}

std::uint64_t param_count(const ModelConfig& config) {
  config.validate();
  const std::uint64_t d = config.embed_dim, f = config.ffn_dim, v = config.vocab_size,
                      in = config.input_dim, l = config.layers;
  const std::uint64_t norm = 2 * d;
  const std::uint64_t attention = 4 * d * d + 4 * d;
  const std::uint64_t ffn = 2 * d * f + f + d;
  const std::uint64_t encoder_layer = 2 * norm + attention + ffn;
  const std::uint64_t decoder_layer = 3 * norm + 2 * attention + ffn;
  return in * d + d + v * d + l * encoder_layer + norm + l * decoder_layer + norm;
}

// ---- parameters -----------------------------------------------------------

namespace {

template <class T>
LayerNormWeights<T> make_norm(std::uint32_t d) {
  return {Matrix<T>::Ones(1, d), Matrix<T>::Zero(1, d)};
}

template <class T>
AttentionWeights<T> make_attention(std::uint32_t d) {
  return {Matrix<T>::Zero(d, d), Matrix<T>::Zero(1, d), Matrix<T>::Zero(d, d),
          Matrix<T>::Zero(1, d), Matrix<T>::Zero(d, d), Matrix<T>::Zero(1, d),
          Matrix<T>::Zero(d, d), Matrix<T>::Zero(1, d)};
}

template <class T>
FeedForwardWeights<T> make_ffn(std::uint32_t d, std::uint32_t f) {
  return {Matrix<T>::Zero(d, f), Matrix<T>::Zero(1, f), Matrix<T>::Zero(f, d),
          Matrix<T>::Zero(1, d)};
}

// Works for both const and mutable Parameters.
template <class P, class M>
std::vector<std::pair<std::string, M*>> collect(P& p) {
  std::vector<std::pair<std::string, M*>> out;
  auto add = [&](std::string name, M& m) { out.emplace_back(std::move(name), &m); };
  auto add_norm = [&](const std::string& prefix, auto& n) {
    add(prefix + ".gain", n.gain);
    add(prefix + ".bias", n.bias);
  };
  auto add_attention = [&](const std::string& prefix, auto& a) {
    add(prefix + ".q.weight", a.wq);
    add(prefix + ".q.bias", a.bq);
    add(prefix + ".k.weight", a.wk);
    add(prefix + ".k.bias", a.bk);
    add(prefix + ".v.weight", a.wv);
    add(prefix + ".v.bias", a.bv);
    add(prefix + ".o.weight", a.wo);
    add(prefix + ".o.bias", a.bo);
  };
  auto add_ffn = [&](const std::string& prefix, auto& f) {
    add(prefix + ".fc1.weight", f.w1);
    add(prefix + ".fc1.bias", f.b1);
    add(prefix + ".fc2.weight", f.w2);
    add(prefix + ".fc2.bias", f.b2);
  };
  add("input_proj.weight", p.input_proj);
  add("input_proj.bias", p.input_bias);
  add("embedding", p.embedding);
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    auto& layer = p.encoder[l];
    add_norm(prefix + ".attn_norm", layer.attn_norm);
    add_attention(prefix + ".self_attn", layer.self_attn);
    add_norm(prefix + ".ffn_norm", layer.ffn_norm);
    add_ffn(prefix + ".ffn", layer.ffn);
  }
  add_norm("encoder.final_norm", p.encoder_norm);
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const std::string prefix = "decoder." + std::to_string(l);
    auto& layer = p.decoder[l];
    add_norm(prefix + ".self_norm", layer.self_norm);
    add_attention(prefix + ".self_attn", layer.self_attn);
    add_norm(prefix + ".cross_norm", layer.cross_norm);
    add_attention(prefix + ".cross_attn", layer.cross_attn);
    add_norm(prefix + ".ffn_norm", layer.ffn_norm);
    add_ffn(prefix + ".ffn", layer.ffn);
  }
  add_norm("decoder.final_norm", p.decoder_norm);
  return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <class T>
Parameters<T>::Parameters(const ModelConfig& config) : config_(config) {
  config.validate();
  const auto d = config.embed_dim, f = config.ffn_dim;
  input_proj = Matrix<T>::Zero(config.input_dim, d);
  input_bias = Matrix<T>::Zero(1, d);
  embedding = Matrix<T>::Zero(config.vocab_size, d);
  for (std::uint32_t l = 0; l < config.layers; ++l) {
    encoder.push_back({make_norm<T>(d), make_attention<T>(d), make_norm<T>(d),
                       make_ffn<T>(d, f)});
    decoder.push_back({make_norm<T>(d), make_attention<T>(d), make_norm<T>(d),
                       make_attention<T>(d), make_norm<T>(d), make_ffn<T>(d, f)});
  }
  encoder_norm = make_norm<T>(d);
  decoder_norm = make_norm<T>(d);
}

template <class T>
std::vector<std::pair<std::string, Matrix<T>*>> Parameters<T>::tensors() {
  return collect<Parameters<T>, Matrix<T>>(*this);
}

template <class T>
std::vector<std::pair<std::string, const Matrix<T>*>> Parameters<T>::tensors() const {
  return collect<const Parameters<T>, const Matrix<T>>(*this);
}

template <class T>
std::uint64_t Parameters<T>::scalar_count() const {
  std::uint64_t n = 0;
  for (const auto& [name, m] : tensors()) n += static_cast<std::uint64_t>(m->size());
  return n;
}

template <class T>
void Parameters<T>::set_zero() {
  for (auto& [name, m] : tensors()) m->setZero();
}

template <class T>
Parameters<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  Parameters<T> params(config);
  Rng rng(seed);
  for (auto& [name, m] : params.tensors()) {
    if (ends_with(name, ".weight") || name == "embedding") {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(m->rows() + m->cols()));
      for (Eigen::Index i = 0; i < m->size(); ++i)
        m->data()[i] = static_cast<T>(rng.uniform(-limit, limit));
    } else if (ends_with(name, ".gain")) {
      m->setOnes();
    } else {
      m->setZero();
    }
  }
  return params;
}

// ---- building blocks ------------------------------------------------------

namespace {

constexpr double kLayerNormEps = 1e-5;

template <class T>
Matrix<T> linear(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
  Matrix<T> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// Accumulates dW and db; returns dx.
template <class T>
Matrix<T> linear_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& dy,
                          Matrix<T>& dw, Matrix<T>& db) {
  dw.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
  return dy * w.transpose();
}

template <class T>
Matrix<T> layer_norm(const Matrix<T>& x, const LayerNormWeights<T>& w,
                     LayerNormCache<T>* cache) {
  const auto rows = x.rows(), cols = x.cols();
  Matrix<T> normalized(rows, cols);
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) mean += static_cast<double>(x(r, c));
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double dx = static_cast<double>(x(r, c)) - mean;
      var += dx * dx;
    }
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[static_cast<std::size_t>(r)] = inv;
    for (Eigen::Index c = 0; c < cols; ++c)
      normalized(r, c) = static_cast<T>((static_cast<double>(x(r, c)) - mean) * inv);
  }
  Matrix<T> y = (normalized.array().rowwise() * w.gain.row(0).array()).matrix();
  y.rowwise() += w.bias.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <class T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const LayerNormWeights<T>& w,
                              const LayerNormCache<T>& cache, LayerNormWeights<T>& g) {
  const auto& xhat = cache.normalized;
  g.gain += (dy.array() * xhat.array()).colwise().sum().matrix();
  g.bias += dy.colwise().sum();
  const auto rows = dy.rows(), cols = dy.cols();
  Matrix<T> dx(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mean_d = 0.0, mean_dx = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double dxhat = static_cast<double>(dy(r, c)) * static_cast<double>(w.gain(0, c));
      mean_d += dxhat;
      mean_dx += dxhat * static_cast<double>(xhat(r, c));
    }
    mean_d /= static_cast<double>(cols);
    mean_dx /= static_cast<double>(cols);
    const double inv = cache.inv_std[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double dxhat = static_cast<double>(dy(r, c)) * static_cast<double>(w.gain(0, c));
      dx(r, c) = static_cast<T>(
          inv * (dxhat - mean_d - static_cast<double>(xhat(r, c)) * mean_dx));
    }
  }
  return dx;
}

// Multi-head scaled dot-product attention. Masked keys get probability 0.
template <class T>
Matrix<T> attention(const Matrix<T>& query_input, const Matrix<T>& kv_input,
                    const AttentionWeights<T>& w, std::uint32_t heads, bool causal,
                    const std::vector<std::uint8_t>* key_mask, AttentionCache<T>* cache) {
  Matrix<T> q = linear(query_input, w.wq, w.bq);
  Matrix<T> k = linear(kv_input, w.wk, w.bk);
  Matrix<T> v = linear(kv_input, w.wv, w.bv);
  const auto tq = q.rows(), tk = k.rows();
  const auto d = q.cols();
  const auto dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix<T> context(tq, d);
  std::vector<double> row(static_cast<std::size_t>(tk));
  if (cache) cache->probs.clear();
  for (std::uint32_t h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    Matrix<T> probs = qh * kh.transpose();
    for (Eigen::Index i = 0; i < tq; ++i) {
      double max_score = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < tk; ++j) {
        const bool allowed = !(causal && j > i) &&
                             !(key_mask && (*key_mask)[static_cast<std::size_t>(j)] == 0);
        row[static_cast<std::size_t>(j)] =
            allowed ? static_cast<double>(probs(i, j)) * scale
                    : -std::numeric_limits<double>::infinity();
        max_score = std::max(max_score, row[static_cast<std::size_t>(j)]);
      }
      double sum = 0.0;
      for (Eigen::Index j = 0; j < tk; ++j) {
        auto& r = row[static_cast<std::size_t>(j)];
        r = std::isinf(r) ? 0.0 : std::exp(r - max_score);
        sum += r;
      }
      for (Eigen::Index j = 0; j < tk; ++j)
        probs(i, j) = sum > 0.0 ? static_cast<T>(row[static_cast<std::size_t>(j)] / sum)
                                : T(0);
    }
    context.middleCols(h * dh, dh).noalias() = probs * v.middleCols(h * dh, dh);
    if (cache) cache->probs.push_back(std::move(probs));
  }
  Matrix<T> out = linear(context, w.wo, w.bo);
  if (cache) {
    cache->query_input = query_input;
    cache->kv_input = kv_input;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
  }
  return out;
}

// Returns (d query_input, d kv_input).
template <class T>
std::pair<Matrix<T>, Matrix<T>> attention_backward(const Matrix<T>& dout,
                                                   const AttentionWeights<T>& w,
                                                   const AttentionCache<T>& c,
                                                   std::uint32_t heads,
                                                   AttentionWeights<T>& g) {
  const Matrix<T> dcontext = linear_backward(c.context, w.wo, dout, g.wo, g.bo);
  const auto d = c.q.cols();
  const auto dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Matrix<T> dq = Matrix<T>::Zero(c.q.rows(), d);
  Matrix<T> dk = Matrix<T>::Zero(c.k.rows(), d);
  Matrix<T> dv = Matrix<T>::Zero(c.v.rows(), d);
  for (std::uint32_t h = 0; h < heads; ++h) {
    const auto& probs = c.probs[h];
    const auto dctx = dcontext.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() += probs.transpose() * dctx;
    Matrix<T> dscores = dctx * c.v.middleCols(h * dh, dh).transpose();
    for (Eigen::Index i = 0; i < dscores.rows(); ++i) {
      double dot = 0.0;
      for (Eigen::Index j = 0; j < dscores.cols(); ++j)
        dot += static_cast<double>(probs(i, j)) * static_cast<double>(dscores(i, j));
      for (Eigen::Index j = 0; j < dscores.cols(); ++j)
        dscores(i, j) = static_cast<T>(static_cast<double>(probs(i, j)) *
                                       (static_cast<double>(dscores(i, j)) - dot));
    }
    dq.middleCols(h * dh, dh).noalias() += scale * (dscores * c.k.middleCols(h * dh, dh));
    dk.middleCols(h * dh, dh).noalias() +=
        scale * (dscores.transpose() * c.q.middleCols(h * dh, dh));
  }
  Matrix<T> dquery = linear_backward(c.query_input, w.wq, dq, g.wq, g.bq);
  Matrix<T> dkv = linear_backward(c.kv_input, w.wk, dk, g.wk, g.bk);
  dkv += linear_backward(c.kv_input, w.wv, dv, g.wv, g.bv);
  return {std::move(dquery), std::move(dkv)};
}

template <class T>
Matrix<T> feed_forward(const Matrix<T>& x, const FeedForwardWeights<T>& w,
                       FeedForwardCache<T>* cache) {
  Matrix<T> h = linear(x, w.w1, w.b1).cwiseMax(T(0));
  Matrix<T> y = linear(h, w.w2, w.b2);
  if (cache) {
    cache->input = x;
    cache->activated = std::move(h);
  }
  return y;
}

template <class T>
Matrix<T> feed_forward_backward(const Matrix<T>& dy, const FeedForwardWeights<T>& w,
                                const FeedForwardCache<T>& c, FeedForwardWeights<T>& g) {
  Matrix<T> dh = linear_backward(c.activated, w.w2, dy, g.w2, g.b2);
  dh = (c.activated.array() > T(0)).select(dh, T(0));
  return linear_backward(c.input, w.w1, dh, g.w1, g.b1);
}

// Inverted dropout mask, or an empty matrix when inactive.
template <class T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (p <= 0.0 || rng == nullptr) return {};
  Matrix<T> mask(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng->uniform() < p ? T(0) : keep;
  return mask;
}

template <class T>
void apply_mask(Matrix<T>& x, const Matrix<T>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

template <class T>
Matrix<T> to_matrix(const FeatureSequence& src) {
  Matrix<T> m(src.frames, src.dim);
  for (std::uint32_t t = 0; t < src.frames; ++t)
    for (std::uint32_t c = 0; c < src.dim; ++c)
      m(t, c) = static_cast<T>(src.values[std::size_t{t} * src.dim + c]);
  return m;
}

void check_source(const ModelConfig& config, const FeatureSequence& src) {
  if (src.dim != config.input_dim)
    throw Error(ErrorCode::kDimensionMismatch,
                "feature width " + std::to_string(src.dim) + " != model input_dim " +
                    std::to_string(config.input_dim));
  if (src.values.size() != std::size_t{src.frames} * src.dim)
    throw Error(ErrorCode::kDimensionMismatch, "feature buffer does not match T x D");
  if (src.frames < 1) throw Error(ErrorCode::kInvalidArgument, "empty source sequence");
  if (src.frames > config.max_positions)
    throw Error(ErrorCode::kOutOfRange,
                "source length " + std::to_string(src.frames) + " exceeds max_positions " +
                    std::to_string(config.max_positions));
  if (!src.frame_mask.empty() && src.frame_mask.size() != src.frames)
    throw Error(ErrorCode::kDimensionMismatch, "frame mask length != frame count");
}

void check_target(const ModelConfig& config, const std::vector<std::uint32_t>& ids) {
  if (ids.size() > config.max_positions)
    throw Error(ErrorCode::kOutOfRange,
                "target length " + std::to_string(ids.size()) + " exceeds max_positions " +
                    std::to_string(config.max_positions));
  for (auto id : ids) {
    if (id >= config.vocab_size)
      throw Error(ErrorCode::kOutOfRange, "token id " + std::to_string(id) +
                                              " >= vocab_size " +
                                              std::to_string(config.vocab_size));
  }
}

std::vector<std::uint8_t> source_mask_of(const FeatureSequence& src) {
  if (src.frame_mask.empty()) return std::vector<std::uint8_t>(src.frames, 1);
  return src.frame_mask;
}

template <class T>
Matrix<T> run_encoder(const Parameters<T>& p, const Matrix<T>& source,
                      const std::vector<std::uint8_t>& mask, double dropout, Rng* rng,
                      ForwardCache<T>* cache) {
  const auto& cfg = p.config();
  Matrix<T> x = linear(source, p.input_proj, p.input_bias);
  x += sinusoidal_positions<T>(static_cast<std::uint32_t>(x.rows()), cfg.embed_dim);
  Matrix<T> mask0 = dropout_mask<T>(x.rows(), x.cols(), dropout, rng);
  apply_mask(x, mask0);
  if (cache) {
    cache->source_dropout = std::move(mask0);
    cache->encoder.resize(p.encoder.size());
  }
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const auto& w = p.encoder[l];
    auto* lc = cache ? &cache->encoder[l] : nullptr;
    Matrix<T> a = layer_norm(x, w.attn_norm, lc ? &lc->attn_norm : nullptr);
    Matrix<T> s = attention(a, a, w.self_attn, cfg.heads, false, &mask,
                            lc ? &lc->self_attn : nullptr);
    Matrix<T> m1 = dropout_mask<T>(s.rows(), s.cols(), dropout, rng);
    apply_mask(s, m1);
    x += s;
    Matrix<T> f = layer_norm(x, w.ffn_norm, lc ? &lc->ffn_norm : nullptr);
    Matrix<T> y = feed_forward(f, w.ffn, lc ? &lc->ffn : nullptr);
    Matrix<T> m2 = dropout_mask<T>(y.rows(), y.cols(), dropout, rng);
    apply_mask(y, m2);
    x += y;
    if (lc) {
      lc->attn_dropout = std::move(m1);
      lc->ffn_dropout = std::move(m2);
    }
  }
  return layer_norm(x, p.encoder_norm, cache ? &cache->encoder_norm : nullptr);
}

template <class T>
Matrix<T> run_decoder(const Parameters<T>& p, const Matrix<T>& memory,
                      const std::vector<std::uint8_t>& mask,
                      const std::vector<std::uint32_t>& ids, double dropout, Rng* rng,
                      ForwardCache<T>* cache) {
  const auto& cfg = p.config();
  const auto n = static_cast<Eigen::Index>(ids.size());
  const T emb_scale = static_cast<T>(std::sqrt(static_cast<double>(cfg.embed_dim)));
  Matrix<T> x(n, cfg.embed_dim);
  for (Eigen::Index t = 0; t < n; ++t) x.row(t) = p.embedding.row(ids[t]) * emb_scale;
  x += sinusoidal_positions<T>(static_cast<std::uint32_t>(n), cfg.embed_dim);
  Matrix<T> mask0 = dropout_mask<T>(x.rows(), x.cols(), dropout, rng);
  apply_mask(x, mask0);
  if (cache) {
    cache->target_dropout = std::move(mask0);
    cache->decoder.resize(p.decoder.size());
  }
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const auto& w = p.decoder[l];
    auto* lc = cache ? &cache->decoder[l] : nullptr;
    Matrix<T> a = layer_norm(x, w.self_norm, lc ? &lc->self_norm : nullptr);
    Matrix<T> s = attention(a, a, w.self_attn, cfg.heads, true, nullptr,
                            lc ? &lc->self_attn : nullptr);
    Matrix<T> m1 = dropout_mask<T>(s.rows(), s.cols(), dropout, rng);
    apply_mask(s, m1);
    x += s;
    Matrix<T> b = layer_norm(x, w.cross_norm, lc ? &lc->cross_norm : nullptr);
    Matrix<T> c = attention(b, memory, w.cross_attn, cfg.heads, false, &mask,
                            lc ? &lc->cross_attn : nullptr);
    Matrix<T> m2 = dropout_mask<T>(c.rows(), c.cols(), dropout, rng);
    apply_mask(c, m2);
    x += c;
    Matrix<T> f = layer_norm(x, w.ffn_norm, lc ? &lc->ffn_norm : nullptr);
    Matrix<T> y = feed_forward(f, w.ffn, lc ? &lc->ffn : nullptr);
    Matrix<T> m3 = dropout_mask<T>(y.rows(), y.cols(), dropout, rng);
    apply_mask(y, m3);
    x += y;
    if (lc) {
      lc->self_dropout = std::move(m1);
      lc->cross_dropout = std::move(m2);
      lc->ffn_dropout = std::move(m3);
    }
  }
  return layer_norm(x, p.decoder_norm, cache ? &cache->decoder_norm : nullptr);
}

}  // namespace

template <class T>
Matrix<T> sinusoidal_positions(std::uint32_t length, std::uint32_t dim) {
  Matrix<T> pe(length, dim);
  for (std::uint32_t pos = 0; pos < length; ++pos) {
    for (std::uint32_t i = 0; i < dim; ++i) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <class T>
ForwardResult<T> forward(const Parameters<T>& params, const FeatureSequence& source,
                         const TokenSequence& target_in, bool train_mode, Rng* rng) {
  const auto& cfg = params.config();
  check_source(cfg, source);
  check_target(cfg, target_in.ids);
  const double p = train_mode ? cfg.dropout : 0.0;
  if (p > 0.0 && rng == nullptr)
    throw Error(ErrorCode::kInvalidArgument, "training-mode dropout needs an rng");

  ForwardResult<T> result;
  auto& cache = result.cache;
  cache.config = cfg;
  cache.source = to_matrix<T>(source);
  cache.source_mask = source_mask_of(source);
  cache.target = target_in.ids;
  cache.memory = run_encoder(params, cache.source, cache.source_mask, p, rng, &cache);
  cache.decoder_output =
      run_decoder(params, cache.memory, cache.source_mask, cache.target, p, rng, &cache);
  result.logits = cache.decoder_output * params.embedding.transpose();
  return result;
}

template <class T>
void backward_accumulate(const Parameters<T>& params, const ForwardCache<T>& cache,
                         const Matrix<T>& dlogits, Parameters<T>& grads) {
  const auto& cfg = params.config();
  if (!(cache.config == cfg) || !(grads.config() == cfg))
    throw Error(ErrorCode::kConfigMismatch, "cache, parameters and gradients disagree on config");
  if (dlogits.rows() != static_cast<Eigen::Index>(cache.target.size()) ||
      dlogits.cols() != static_cast<Eigen::Index>(cfg.vocab_size))
    throw Error(ErrorCode::kDimensionMismatch, "logit gradient has the wrong shape");
  if (cache.decoder.size() != cfg.layers || cache.encoder.size() != cfg.layers)
    throw Error(ErrorCode::kConfigMismatch, "cache layer count does not match parameters");

  // Output projection (tied embedding).
  grads.embedding.noalias() += dlogits.transpose() * cache.decoder_output;
  Matrix<T> dx = dlogits * params.embedding;
  dx = layer_norm_backward(dx, params.decoder_norm, cache.decoder_norm, grads.decoder_norm);

  Matrix<T> dmemory = Matrix<T>::Zero(cache.memory.rows(), cache.memory.cols());
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const auto& w = params.decoder[l];
    const auto& c = cache.decoder[l];
    auto& g = grads.decoder[l];

    Matrix<T> branch = dx;
    apply_mask(branch, c.ffn_dropout);
    dx += layer_norm_backward(feed_forward_backward(branch, w.ffn, c.ffn, g.ffn), w.ffn_norm,
                              c.ffn_norm, g.ffn_norm);

    branch = dx;
    apply_mask(branch, c.cross_dropout);
    auto [dq_cross, dkv_cross] = attention_backward(branch, w.cross_attn, c.cross_attn,
                                                    cfg.heads, g.cross_attn);
    dmemory += dkv_cross;
    dx += layer_norm_backward(dq_cross, w.cross_norm, c.cross_norm, g.cross_norm);

    branch = dx;
    apply_mask(branch, c.self_dropout);
    auto [dq_self, dkv_self] =
        attention_backward(branch, w.self_attn, c.self_attn, cfg.heads, g.self_attn);
    dq_self += dkv_self;
    dx += layer_norm_backward(dq_self, w.self_norm, c.self_norm, g.self_norm);
  }
  apply_mask(dx, cache.target_dropout);
  const T emb_scale = static_cast<T>(std::sqrt(static_cast<double>(cfg.embed_dim)));
  for (std::size_t t = 0; t < cache.target.size(); ++t)
    grads.embedding.row(cache.target[t]) += emb_scale * dx.row(static_cast<Eigen::Index>(t));

  // Encoder.
  Matrix<T> de =
      layer_norm_backward(dmemory, params.encoder_norm, cache.encoder_norm, grads.encoder_norm);
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const auto& w = params.encoder[l];
    const auto& c = cache.encoder[l];
    auto& g = grads.encoder[l];

    Matrix<T> branch = de;
    apply_mask(branch, c.ffn_dropout);
    de += layer_norm_backward(feed_forward_backward(branch, w.ffn, c.ffn, g.ffn), w.ffn_norm,
                              c.ffn_norm, g.ffn_norm);

    branch = de;
    apply_mask(branch, c.attn_dropout);
    auto [dq, dkv] =
        attention_backward(branch, w.self_attn, c.self_attn, cfg.heads, g.self_attn);
    dq += dkv;
    de += layer_norm_backward(dq, w.attn_norm, c.attn_norm, g.attn_norm);
  }
  apply_mask(de, cache.source_dropout);
  grads.input_proj.noalias() += cache.source.transpose() * de;
  grads.input_bias += de.colwise().sum();
}

template <class T>
Parameters<T> backward(const Parameters<T>& params, const ForwardCache<T>& cache,
                       const Matrix<T>& dlogits) {
  Parameters<T> grads(params.config());
  grads.set_zero();
  backward_accumulate(params, cache, dlogits, grads);
  return grads;
}

template <class T>
Matrix<T> encode_source(const Parameters<T>& params, const FeatureSequence& source) {
  check_source(params.config(), source);
  return run_encoder<T>(params, to_matrix<T>(source), source_mask_of(source), 0.0, nullptr,
                        nullptr);
}

template <class T>
Matrix<T> decode_logits(const Parameters<T>& params, const Matrix<T>& memory,
                        const std::vector<std::uint8_t>& source_mask,
                        const std::vector<std::uint32_t>& target_in) {
  check_target(params.config(), target_in);
  if (source_mask.size() != static_cast<std::size_t>(memory.rows()))
    throw Error(ErrorCode::kDimensionMismatch, "source mask length != memory rows");
  Matrix<T> out = run_decoder<T>(params, memory, source_mask, target_in, 0.0, nullptr, nullptr);
  return out * params.embedding.transpose();
}

namespace {

// One query row against precomputed keys/values.
template <class T>
Matrix<T> attend_row(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                     std::uint32_t heads, const std::vector<std::uint8_t>* key_mask) {
  const auto d = q.cols();
  const auto dh = d / heads;
  const auto tk = k.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix<T> context(1, d);
  std::vector<double> row(static_cast<std::size_t>(tk));
  Matrix<T> probs(1, tk);
  for (std::uint32_t h = 0; h < heads; ++h) {
    const Matrix<T> scores = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose();
    double max_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < tk; ++j) {
      const bool allowed = !(key_mask && (*key_mask)[static_cast<std::size_t>(j)] == 0);
      row[static_cast<std::size_t>(j)] = allowed
                                             ? static_cast<double>(scores(0, j)) * scale
                                             : -std::numeric_limits<double>::infinity();
      max_score = std::max(max_score, row[static_cast<std::size_t>(j)]);
    }
    double sum = 0.0;
    for (auto& r : row) {
      r = std::isinf(r) ? 0.0 : std::exp(r - max_score);
      sum += r;
    }
    for (Eigen::Index j = 0; j < tk; ++j)
      probs(0, j) = sum > 0.0 ? static_cast<T>(row[static_cast<std::size_t>(j)] / sum) : T(0);
    context.middleCols(h * dh, dh).noalias() = probs * v.middleCols(h * dh, dh);
  }
  return context;
}

template <class T>
void append_row(Matrix<T>& m, const Matrix<T>& row) {
  m.conservativeResize(m.rows() + 1, row.cols());
  m.row(m.rows() - 1) = row.row(0);
}

}  // namespace

template <class T>
DecoderState<T> start_decoding(const Parameters<T>& params, const Matrix<T>& memory,
                               const std::vector<std::uint8_t>& source_mask) {
  if (source_mask.size() != static_cast<std::size_t>(memory.rows()))
    throw Error(ErrorCode::kDimensionMismatch, "source mask length != memory rows");
  DecoderState<T> state;
  state.source_mask = source_mask;
  const auto d = params.config().embed_dim;
  for (const auto& w : params.decoder) {
    state.cross_k.push_back(linear(memory, w.cross_attn.wk, w.cross_attn.bk));
    state.cross_v.push_back(linear(memory, w.cross_attn.wv, w.cross_attn.bv));
    state.self_k.emplace_back(0, d);
    state.self_v.emplace_back(0, d);
  }
  return state;
}

template <class T>
Matrix<T> decode_step(const Parameters<T>& params, DecoderState<T>& state,
                      std::uint32_t token) {
  const auto& cfg = params.config();
  if (token >= cfg.vocab_size)
    throw Error(ErrorCode::kOutOfRange, "token id " + std::to_string(token) +
                                            " >= vocab_size " + std::to_string(cfg.vocab_size));
  if (state.length >= cfg.max_positions)
    throw Error(ErrorCode::kOutOfRange, "decoding past max_positions");
  const T emb_scale = static_cast<T>(std::sqrt(static_cast<double>(cfg.embed_dim)));
  Matrix<T> x = params.embedding.row(token) * emb_scale;
  x += sinusoidal_positions<T>(state.length + 1, cfg.embed_dim).row(state.length);
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& w = params.decoder[l];
    const Matrix<T> a = layer_norm<T>(x, w.self_norm, nullptr);
    append_row(state.self_k[l], linear(a, w.self_attn.wk, w.self_attn.bk));
    append_row(state.self_v[l], linear(a, w.self_attn.wv, w.self_attn.bv));
    const Matrix<T> qs = linear(a, w.self_attn.wq, w.self_attn.bq);
    x += linear(attend_row(qs, state.self_k[l], state.self_v[l], cfg.heads, nullptr),
                w.self_attn.wo, w.self_attn.bo);
    const Matrix<T> b = layer_norm<T>(x, w.cross_norm, nullptr);
    const Matrix<T> qc = linear(b, w.cross_attn.wq, w.cross_attn.bq);
    x += linear(attend_row(qc, state.cross_k[l], state.cross_v[l], cfg.heads,
                           &state.source_mask),
                w.cross_attn.wo, w.cross_attn.bo);
    const Matrix<T> f = layer_norm<T>(x, w.ffn_norm, nullptr);
    x += feed_forward<T>(f, w.ffn, nullptr);
  }
  ++state.length;
  const Matrix<T> out = layer_norm<T>(x, params.decoder_norm, nullptr);
  return out * params.embedding.transpose();
}

#define P2TX_INSTANTIATE(T)                                                              \
  template class Parameters<T>;                                                          \
  template Parameters<T> init_parameters<T>(const ModelConfig&, std::uint64_t);          \
  template ForwardResult<T> forward<T>(const Parameters<T>&, const FeatureSequence&,     \
                                       const TokenSequence&, bool, Rng*);                \
  template void backward_accumulate<T>(const Parameters<T>&, const ForwardCache<T>&,     \
                                       const Matrix<T>&, Parameters<T>&);                \
  template Parameters<T> backward<T>(const Parameters<T>&, const ForwardCache<T>&,       \
                                     const Matrix<T>&);                                  \
  template Matrix<T> encode_source<T>(const Parameters<T>&, const FeatureSequence&);     \
  template Matrix<T> decode_logits<T>(const Parameters<T>&, const Matrix<T>&,            \
                                      const std::vector<std::uint8_t>&,                  \
                                      const std::vector<std::uint32_t>&);                \
  template Matrix<T> sinusoidal_positions<T>(std::uint32_t, std::uint32_t);             \
  template DecoderState<T> start_decoding<T>(const Parameters<T>&, const Matrix<T>&,     \
                                             const std::vector<std::uint8_t>&);          \
  template Matrix<T> decode_step<T>(const Parameters<T>&, DecoderState<T>&, std::uint32_t);

P2TX_INSTANTIATE(float)
P2TX_INSTANTIATE(double)

#undef P2TX_INSTANTIATE

}  // namespace p2tx
