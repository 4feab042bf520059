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

#include "p2tx/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "p2tx/byte_io.hpp"

namespace p2tx {
namespace {

std::string join_problems(const std::string& what, const std::vector<std::string>& problems) {
  std::string msg = what;
  for (const auto& p : problems) msg += "\n  " + p;
  return msg;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_bool(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off") {
    out = false;
    return true;
  }
  return false;
}

struct Binder {
  std::vector<std::string>& problems;
  const std::filesystem::path& base;

  void u32(const std::string& key, const std::string& v, std::uint32_t& out) {
    if (!parse_number(v, out)) problems.push_back(key + ": expected a non-negative integer, got '" + v + "'");
  }
  void u64(const std::string& key, const std::string& v, std::uint64_t& out) {
    if (!parse_number(v, out)) problems.push_back(key + ": expected a non-negative integer, got '" + v + "'");
  }
  void real(const std::string& key, const std::string& v, double& out) {
    if (!parse_number(v, out)) problems.push_back(key + ": expected a number, got '" + v + "'");
  }
  void flag(const std::string& key, const std::string& v, bool& out) {
    if (!parse_bool(v, out)) problems.push_back(key + ": expected true or false, got '" + v + "'");
  }
  void path(const std::string&, const std::string& v, std::filesystem::path& out) {
    std::filesystem::path p(v);
    out = p.empty() || p.is_absolute() ? p : base / p;
  }
};

using Setter = std::function<void(Binder&, const std::string&, const std::string&, RunConfig&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path = [&t](const char* key, std::filesystem::path RunPaths::*field) {
      t[std::string("paths.") + key] = [field](Binder& b, const std::string& k,
                                               const std::string& v, RunConfig& c) {
        b.path(k, v, c.paths.*field);
      };
    };
    path("run_dir", &RunPaths::run_dir);
    path("train_poses", &RunPaths::train_poses);
    path("train_text", &RunPaths::train_text);
    path("dev_poses", &RunPaths::dev_poses);
    path("dev_text", &RunPaths::dev_text);
    path("test_poses", &RunPaths::test_poses);
    path("test_text", &RunPaths::test_text);
    path("vocab", &RunPaths::vocab);
    path("checkpoints", &RunPaths::checkpoints);

    t["data.target_fps"] = [](Binder& b, const std::string& k, const std::string& v,
                              RunConfig& c) {
      try {
        c.target_fps = parse_frame_rate(v);
      } catch (const Error& e) {
        b.problems.push_back(k + ": " + e.what());
      }
    };
    t["data.components"] = [](Binder&, const std::string&, const std::string& v,
                              RunConfig& c) {
      c.components.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) c.components.push_back(item);
      }
    };

    auto u32 = [&t](const char* key, auto getter) {
      t[key] = [getter](Binder& b, const std::string& k, const std::string& v, RunConfig& c) {
        b.u32(k, v, getter(c));
      };
    };
    auto real = [&t](const char* key, auto getter) {
      t[key] = [getter](Binder& b, const std::string& k, const std::string& v, RunConfig& c) {
        b.real(k, v, getter(c));
      };
    };
    auto flag = [&t](const char* key, auto getter) {
      t[key] = [getter](Binder& b, const std::string& k, const std::string& v, RunConfig& c) {
        b.flag(k, v, getter(c));
      };
    };
    auto u64 = [&t](const char* key, auto getter) {
      t[key] = [getter](Binder& b, const std::string& k, const std::string& v, RunConfig& c) {
        b.u64(k, v, getter(c));
      };
    };

    u32("model.layers", [](RunConfig& c) -> auto& { return c.model.layers; });
    u32("model.heads", [](RunConfig& c) -> auto& { return c.model.heads; });
    u32("model.ffn_dim", [](RunConfig& c) -> auto& { return c.model.ffn_dim; });
    u32("model.embed_dim", [](RunConfig& c) -> auto& { return c.model.embed_dim; });
    u32("model.max_positions", [](RunConfig& c) -> auto& { return c.model.max_positions; });
    real("model.dropout", [](RunConfig& c) -> auto& { return c.model.dropout; });

    u32("training.max_epochs", [](RunConfig& c) -> auto& { return c.training.max_epochs; });
    u32("training.batch_size", [](RunConfig& c) -> auto& { return c.training.batch_size; });
    real("training.learning_rate", [](RunConfig& c) -> auto& { return c.training.learning_rate; });
    u32("training.warmup_updates", [](RunConfig& c) -> auto& { return c.training.warmup_updates; });
    real("training.label_smoothing", [](RunConfig& c) -> auto& { return c.training.label_smoothing; });
    real("training.clip_norm", [](RunConfig& c) -> auto& { return c.training.clip_norm; });
    u32("training.eval_every", [](RunConfig& c) -> auto& { return c.training.eval_every; });
    u32("training.patience", [](RunConfig& c) -> auto& { return c.training.patience; });
    u64("training.seed", [](RunConfig& c) -> auto& { return c.training.seed; });
    u32("training.max_source_frames",
        [](RunConfig& c) -> auto& { return c.training.max_source_frames; });
    u32("training.average_best", [](RunConfig& c) -> auto& { return c.average_best; });
    u32("training.dev_beam_size", [](RunConfig& c) -> auto& { return c.training.dev_decode.beam_size; });
    u32("training.dev_max_length",
        [](RunConfig& c) -> auto& { return c.training.dev_decode.max_length; });
    t["training.pretrained"] = [](Binder& b, const std::string& k, const std::string& v,
                                  RunConfig& c) { b.path(k, v, c.training.pretrained); };

    flag("augmentation.enabled", [](RunConfig& c) -> auto& { return c.augment; });
    real("augmentation.sigma", [](RunConfig& c) -> auto& { return c.augmentation.sigma; });
    u64("augmentation.seed", [](RunConfig& c) -> auto& { return c.augmentation.seed; });
    flag("augmentation.rotate", [](RunConfig& c) -> auto& { return c.augmentation.rotate; });
    flag("augmentation.shear", [](RunConfig& c) -> auto& { return c.augmentation.shear; });
    flag("augmentation.scale", [](RunConfig& c) -> auto& { return c.augmentation.scale; });
    real("augmentation.center_x", [](RunConfig& c) -> auto& { return c.augmentation.center.x; });
    real("augmentation.center_y", [](RunConfig& c) -> auto& { return c.augmentation.center.y; });

    u32("decode.beam_size", [](RunConfig& c) -> auto& { return c.decode.beam_size; });
    u32("decode.max_length", [](RunConfig& c) -> auto& { return c.decode.max_length; });
    real("decode.alpha", [](RunConfig& c) -> auto& { return c.decode.alpha; });
    real("decode.repetition_penalty",
         [](RunConfig& c) -> auto& { return c.decode.repetition_penalty; });
    return t;
  }();
  return table;
}

}  // namespace

ValidationError::ValidationError(std::string what, std::vector<std::string> problems)
    : Error(ErrorCode::kInvalidArgument, join_problems(what, problems)),
      problems_(std::move(problems)) {}

KeyValues parse_ini(std::string_view text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kFormat, std::string("config: ") + e.what());
  }
  KeyValues out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      out[section] = trim(body.data());  // key outside any section
      continue;
    }
    for (const auto& [key, value] : body) out[section + "." + key] = trim(value.data());
  }
  return out;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

RunConfig build_run_config(const KeyValues& values, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::vector<std::string> problems;
  Binder binder{problems, base_dir};
  const auto& table = setters();
  for (const auto& [key, value] : values) {
    const auto it = table.find(key);
    if (it == table.end()) {
      problems.push_back("unknown key '" + key + "'");
      continue;
    }
    it->second(binder, key, value, config);
  }
  if (config.paths.checkpoints.empty() && !config.paths.run_dir.empty())
    config.paths.checkpoints = config.paths.run_dir / "checkpoints";
  if (config.augment) config.training.augmentation = config.augmentation;
  if (!config.target_fps.valid()) problems.push_back("data.target_fps must be positive");
  if (config.average_best < 1) problems.push_back("training.average_best must be >= 1");

  // Structural model checks; input_dim and vocab_size come later.
  ModelConfig probe = config.model;
  probe.input_dim = std::max<std::uint32_t>(probe.input_dim, 1);
  probe.vocab_size = std::max<std::uint32_t>(probe.vocab_size, kNumSpecials + 1);
  for (auto& p : probe.problems()) problems.push_back("model: " + p);
  for (auto& p : config.training.problems()) problems.push_back("training: " + p);
  for (auto& p : config.decode.problems()) problems.push_back("decode: " + p);
  if (!problems.empty()) throw ValidationError("invalid run config:", std::move(problems));
  return config;
}

RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides, const char* env_seed) {
  auto values = parse_ini(read_text_file(file));
  std::vector<std::string> problems;
  if (env_seed != nullptr) {
    const std::string seed = trim(env_seed);
    if (seed.empty() || seed.find_first_not_of("0123456789") != std::string::npos)
      problems.push_back("P2TX_SEED: expected a non-negative integer, got '" + seed + "'");
    else
      values["training.seed"] = seed;
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      problems.push_back("override '" + o + "' is not section.key=value");
      continue;
    }
    values[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
  if (!problems.empty()) throw ValidationError("invalid overrides or environment:", std::move(problems));
  return build_run_config(values, file.parent_path());
}

void require_training_inputs(const RunConfig& config) {
  std::vector<std::string> problems;
  auto need = [&](const char* key, const std::filesystem::path& p) {
    if (p.empty())
      problems.push_back(std::string(key) + " is required");
    else if (!std::filesystem::exists(p))
      problems.push_back(std::string(key) + ": '" + p.string() + "' does not exist");
  };
  if (config.paths.run_dir.empty()) problems.push_back("paths.run_dir is required");
  need("paths.train_poses", config.paths.train_poses);
  need("paths.train_text", config.paths.train_text);
  need("paths.dev_poses", config.paths.dev_poses);
  need("paths.dev_text", config.paths.dev_text);
  need("paths.vocab", config.paths.vocab);
  if (!config.training.pretrained.empty()) need("training.pretrained", config.training.pretrained);
  if (!problems.empty()) throw ValidationError("missing training inputs:", std::move(problems));
}

}  // namespace p2tx
