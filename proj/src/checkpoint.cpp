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

#include "p2tx/checkpoint.hpp"

#include <cmath>
#include <cstring>

#include "p2tx/byte_io.hpp"
#include "p2tx/error.hpp"

namespace p2tx {
namespace {

constexpr std::string_view kCheckpointMagic = "P2TX-CKPT v1\n";

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  const auto& c = ckpt.config();
  for (std::uint32_t v : {c.layers, c.heads, c.ffn_dim, c.embed_dim, c.input_dim,
                          c.vocab_size, c.max_positions})
    w.put(v);
  w.put(c.dropout);
  const auto tensors = ckpt.params.tensors();
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    w.put_string16(name);
    w.put(std::uint32_t{2});
    w.put(static_cast<std::uint32_t>(m->rows()));
    w.put(static_cast<std::uint32_t>(m->cols()));
    for (Eigen::Index i = 0; i < m->size(); ++i) w.put(m->data()[i]);
  }
  w.put(ckpt.updates);
  w.put(ckpt.epoch);
  w.put(static_cast<std::uint8_t>(ckpt.dev_bleu.has_value()));
  w.put(ckpt.dev_bleu.value_or(0.0));
  w.put(ckpt.vocab_hash);
  return std::move(w).take();
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kCheckpointMagic.size() ||
      r.get_bytes(kCheckpointMagic.size()) != kCheckpointMagic)
    throw Error(ErrorCode::kFormat, "not a checkpoint (bad header)");
  ModelConfig c;
  c.layers = r.get<std::uint32_t>();
  c.heads = r.get<std::uint32_t>();
  c.ffn_dim = r.get<std::uint32_t>();
  c.embed_dim = r.get<std::uint32_t>();
  c.input_dim = r.get<std::uint32_t>();
  c.vocab_size = r.get<std::uint32_t>();
  c.max_positions = r.get<std::uint32_t>();
  c.dropout = r.get<double>();
  if (const auto issues = c.problems(); !issues.empty())
    throw Error(ErrorCode::kFormat, "checkpoint config invalid: " + issues.front());

  Checkpoint ckpt{Parameters<float>(c), 0, 0, std::nullopt, 0};
  auto tensors = ckpt.params.tensors();
  const auto count = r.get<std::uint32_t>();
  if (count != tensors.size())
    throw Error(ErrorCode::kFormat, "checkpoint has " + std::to_string(count) +
                                        " tensors, config implies " +
                                        std::to_string(tensors.size()));
  for (auto& [name, m] : tensors) {
    const auto stored = r.get_string16();
    if (stored != name)
      throw Error(ErrorCode::kFormat, "expected tensor '" + name + "', found '" + stored + "'");
    const auto rank = r.get<std::uint32_t>();
    if (rank != 2) throw Error(ErrorCode::kFormat, "tensor '" + name + "' has rank " + std::to_string(rank));
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows != m->rows() || cols != m->cols())
      throw Error(ErrorCode::kFormat, "tensor '" + name + "' has the wrong shape");
    r.require(std::size_t{rows} * cols * sizeof(float));
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const float v = r.get<float>();
      if (!std::isfinite(v))
        throw Error(ErrorCode::kCorrupt, "non-finite value in tensor '" + name + "'");
      m->data()[i] = v;
    }
  }
  ckpt.updates = r.get<std::uint64_t>();
  ckpt.epoch = r.get<std::uint32_t>();
  const auto has_score = r.get<std::uint8_t>();
  const auto score = r.get<double>();
  if (has_score) ckpt.dev_bleu = score;
  ckpt.vocab_hash = r.get<std::uint64_t>();
  if (r.remaining() != 0) throw Error(ErrorCode::kFormat, "trailing bytes after checkpoint");
  return ckpt;
}

void write_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, save_checkpoint(ckpt));
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return load_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

bool identical(const Checkpoint& a, const Checkpoint& b) {
  if (!(a.config() == b.config()) || a.updates != b.updates || a.epoch != b.epoch ||
      a.dev_bleu != b.dev_bleu || a.vocab_hash != b.vocab_hash)
    return false;
  const auto ta = a.params.tensors();
  const auto tb = b.params.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (std::memcmp(ta[i].second->data(), tb[i].second->data(),
                    static_cast<std::size_t>(ta[i].second->size()) * sizeof(float)) != 0)
      return false;
  }
  return true;
}

}  // namespace p2tx
