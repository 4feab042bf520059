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

#include "p2tx/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "p2tx/augment.hpp"
#include "p2tx/byte_io.hpp"
#include "p2tx/checkpoint.hpp"
#include "p2tx/config.hpp"
#include "p2tx/error.hpp"
#include "p2tx/inference.hpp"
#include "p2tx/metrics.hpp"
#include "p2tx/resample.hpp"
#include "p2tx/synthetic.hpp"
#include "p2tx/tokenizer.hpp"

namespace p2tx {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string numbered(std::size_t i, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(buf) + std::string(ext);
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file_bytes(path, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

json diagnostics_json(const std::vector<Diagnostic>& diags) {
  json list = json::array();
  for (const auto& d : diags) {
    json j;
    j["code"] = std::string(to_string(d.code));
    j["severity"] = std::string(to_string(d.severity));
    j["frame"] = d.frame;
    j["keypoint"] = d.keypoint;
    if (d.coordinate) j["coordinate"] = *d.coordinate;
    j["message"] = d.message;
    list.push_back(std::move(j));
  }
  return list;
}

json bleu_json(const BleuReport& r) {
  json j;
  j["bleu"] = r.bleu;
  j["precisions"] = r.precisions;
  j["matches"] = r.matches;
  j["totals"] = r.totals;
  j["brevity_penalty"] = r.brevity_penalty;
  j["hyp_len"] = r.hypothesis_length;
  j["ref_len"] = r.reference_length;
  return j;
}

SynthSpec read_synth_spec(const fs::path& path) {
  const auto values = parse_ini(read_text_file(path));
  SynthSpec spec;
  std::vector<std::string> problems;
  auto u32 = [&](const std::string& key, const std::string& v, std::uint32_t& out) {
    try {
      std::size_t used = 0;
      const auto n = std::stoull(v, &used);
      if (used != v.size() || n > UINT32_MAX) throw std::invalid_argument(v);
      out = static_cast<std::uint32_t>(n);
    } catch (const std::exception&) {
      problems.push_back(key + ": expected a non-negative integer, got '" + v + "'");
    }
  };
  for (const auto& [key, v] : values) {
    if (key.rfind("synthetic.template", 0) == 0) {
      spec.templates.push_back(v);
    } else if (key == "synthetic.pairs") {
      u32(key, v, spec.pairs);
    } else if (key == "synthetic.min_frames") {
      u32(key, v, spec.min_frames);
    } else if (key == "synthetic.max_frames") {
      u32(key, v, spec.max_frames);
    } else if (key == "synthetic.keypoints") {
      u32(key, v, spec.keypoints);
    } else if (key == "synthetic.dims") {
      u32(key, v, spec.dims);
    } else if (key == "synthetic.fps") {
      try {
        spec.fps = parse_frame_rate(v);
      } catch (const Error& e) {
        problems.push_back(key + ": " + e.what());
      }
    } else if (key == "synthetic.seed") {
      try {
        std::size_t used = 0;
        spec.seed = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        problems.push_back(key + ": expected a non-negative integer, got '" + v + "'");
      }
    } else if (key == "synthetic.jitter") {
      try {
        std::size_t used = 0;
        spec.jitter = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        problems.push_back(key + ": expected a number, got '" + v + "'");
      }
    } else {
      problems.push_back("unknown key '" + key + "'");
    }
  }
  for (auto& p : spec.problems()) problems.push_back(p);
  if (!problems.empty()) throw ValidationError("invalid synthetic spec:", std::move(problems));
  return spec;
}

// ---- subcommands ----------------------------------------------------------

struct IngestArgs {
  std::string synthetic;
  std::vector<std::string> jsonl;
  std::string output;
  std::optional<std::uint32_t> pairs;
  std::optional<std::uint64_t> seed;
  std::string fps = "25";
};

json cmd_ingest(const IngestArgs& a) {
  if (a.synthetic.empty() == a.jsonl.empty())
    throw ValidationError("ingest:", {"exactly one of --synthetic or --jsonl is required"});
  const fs::path out_dir(a.output);
  const fs::path poses_dir = out_dir / "poses";
  fs::create_directories(poses_dir);
  json report;
  if (!a.synthetic.empty()) {
    auto spec = read_synth_spec(a.synthetic);
    if (a.pairs) spec.pairs = *a.pairs;
    if (a.seed) spec.seed = *a.seed;
    const auto corpus = generate(spec);
    for (std::size_t i = 0; i < corpus.poses.size(); ++i)
      write_pose_file(poses_dir / numbered(i, ".pose"), corpus.poses[i]);
    write_lines(out_dir / "text.txt", corpus.sentences);
    report["pairs"] = corpus.poses.size();
    report["text"] = (out_dir / "text.txt").string();
  } else {
    const auto fps = parse_frame_rate(a.fps);
    for (const auto& file : a.jsonl) {
      const auto pose = read_pose_jsonl(read_text_file(file), fps);
      write_pose_file(poses_dir / fs::path(file).filename().replace_extension(".pose"), pose);
    }
    report["files"] = a.jsonl.size();
  }
  report["poses"] = poses_dir.string();
  return report;
}

int cmd_validate(const std::vector<std::string>& files, std::ostream& out) {
  json report;
  report["files"] = json::array();
  std::size_t errors = 0, warnings = 0;
  for (const auto& f : files) {
    const auto pose = read_pose_file(f);
    const auto diags = validate(pose);
    for (const auto& d : diags) (d.severity == Severity::kError ? errors : warnings)++;
    json entry;
    entry["path"] = f;
    entry["frames"] = pose.frames();
    entry["keypoints"] = pose.keypoints();
    entry["diagnostics"] = diagnostics_json(diags);
    report["files"].push_back(std::move(entry));
  }
  report["errors"] = errors;
  report["warnings"] = warnings;
  out << report.dump(2) << "\n";
  return errors == 0 ? kExitOk : kExitFailure;
}

json cmd_resample(const std::string& input, const std::string& output, const std::string& fps) {
  const auto pose = read_pose_file(input);
  const auto result = resample(pose, ResampleSpec{parse_frame_rate(fps)});
  write_pose_file(output, result);
  json j;
  j["frames_in"] = pose.frames();
  j["frames_out"] = result.frames();
  j["fps_in"] = pose.fps().value();
  j["fps_out"] = result.fps().value();
  return j;
}

json cmd_augment_preview(const std::string& input, const std::string& output_dir,
                         std::uint32_t count, double sigma, std::uint64_t seed) {
  const auto pose = read_pose_file(input);
  AugmentationPolicy policy;
  policy.sigma = sigma;
  policy.seed = seed;
  Rng rng(seed);
  fs::create_directories(output_dir);
  json list = json::array();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto params = sample_params(policy, rng);
    const auto path = fs::path(output_dir) / numbered(i, ".pose");
    write_pose_file(path, apply(pose, params, policy.center));
    json j;
    j["path"] = path.string();
    j["rotation"] = params.rotation_angle;
    j["shear"] = params.shear_factor;
    j["scale_delta"] = params.scale_delta;
    list.push_back(std::move(j));
  }
  json report;
  report["previews"] = std::move(list);
  return report;
}

json cmd_train_vocab(std::size_t size, const std::vector<std::string>& inputs,
                     const std::string& output) {
  std::vector<std::string> corpora;
  for (const auto& f : inputs) corpora.push_back(read_text_file(f));
  const auto vocab = train_vocab(corpora, size);
  const auto text = vocab.serialize();
  write_file_bytes(output, std::span<const std::uint8_t>(
                               reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  json j;
  j["requested"] = size;
  j["size"] = vocab.size();
  j["merges"] = vocab.merges().size();
  j["inventory"] = character_inventory_size(corpora);
  j["complete"] = vocab.size() == size;
  j["hash"] = format_hash(vocab.hash());
  return j;
}

Vocabulary read_vocab(const fs::path& path) { return Vocabulary::parse(read_text_file(path)); }

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string run_dir;
  std::optional<std::uint32_t> max_epochs;
  std::optional<std::uint64_t> seed;
};

json cmd_train(const TrainArgs& a, std::ostream& err) {
  auto overrides = a.overrides;
  if (!a.run_dir.empty()) overrides.push_back("paths.run_dir=" + fs::absolute(a.run_dir).string());
  if (a.max_epochs) overrides.push_back("training.max_epochs=" + std::to_string(*a.max_epochs));
  if (a.seed) overrides.push_back("training.seed=" + std::to_string(*a.seed));
  const RunConfig rc = load_run_config(a.config, overrides, std::getenv("P2TX_SEED"));
  require_training_inputs(rc);

  const auto vocab = read_vocab(rc.paths.vocab);
  const auto train_set =
      load_split(rc.paths.train_poses, rc.paths.train_text, rc.target_fps, rc.components);
  const auto dev_set =
      load_split(rc.paths.dev_poses, rc.paths.dev_text, rc.target_fps, rc.components);
  ModelConfig mc = rc.model;
  mc.input_dim = feature_dim(train_set.poses.front(), rc.components);
  mc.vocab_size = static_cast<std::uint32_t>(vocab.size());
  mc.validate();

  fs::create_directories(rc.paths.checkpoints);
  std::ofstream log(rc.paths.run_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw Error(ErrorCode::kIo, "cannot write training log in " + rc.paths.run_dir.string());
  TrainingHooks hooks;
  hooks.on_log = [&log](const TrainingLogEntry& e) { log << to_json_line(e) << "\n" << std::flush; };
  hooks.on_warning = [&err](const std::string& w) {
    json j;
    j["warning"] = w;
    err << j.dump() << "\n";
  };
  const auto result = train(mc, vocab, train_set, dev_set, rc.training, hooks);

  json ckpts = json::array();
  for (const auto& c : result.checkpoints) {
    const auto path = rc.paths.checkpoints / ("epoch_" + numbered(c.epoch, ".ckpt"));
    write_checkpoint_file(path, c);
    json j;
    j["path"] = path.string();
    j["epoch"] = c.epoch;
    j["updates"] = c.updates;
    j["dev_bleu"] = *c.dev_bleu;
    ckpts.push_back(std::move(j));
  }
  const std::size_t n = std::min<std::size_t>(rc.average_best, result.checkpoints.size());
  const auto best = select_best(result.checkpoints, n);
  const auto averaged = average_checkpoints(best);
  const auto averaged_path = rc.paths.run_dir / "averaged.ckpt";
  write_checkpoint_file(averaged_path, averaged);

  json report;
  report["run_dir"] = rc.paths.run_dir.string();
  report["epochs"] = result.log.empty() ? 0 : result.log.back().epoch;
  report["evaluations"] = result.evaluations;
  report["final_loss"] = result.log.empty() ? 0.0 : result.log.back().loss;
  report["checkpoints"] = std::move(ckpts);
  report["averaged"] = averaged_path.string();
  report["averaged_of"] = n;
  report["averaged_dev_bleu"] = dev_bleu(averaged.params, vocab, dev_set, rc.training.dev_decode);
  if (!rc.paths.test_poses.empty() && !rc.paths.test_text.empty()) {
    const auto test_set =
        load_split(rc.paths.test_poses, rc.paths.test_text, rc.target_fps, rc.components);
    std::vector<std::string> hyps;
    for (const auto& pose : test_set.poses)
      hyps.push_back(translate(averaged.params, vocab, flatten(pose, rc.components), rc.decode).text);
    write_lines(rc.paths.run_dir / "test_hypotheses.txt", hyps);
    report["test"] = bleu_json(bleu4(hyps, test_set.sentences));
  }
  const auto summary = report.dump(2) + "\n";
  write_file_bytes(rc.paths.run_dir / "summary.json",
                   std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(summary.data()), summary.size()));
  return report;
}

json cmd_average(const std::vector<std::string>& inputs, const std::string& output,
                 std::optional<std::size_t> best) {
  std::vector<Checkpoint> ckpts;
  for (const auto& f : inputs) ckpts.push_back(read_checkpoint_file(f));
  if (best) ckpts = select_best(ckpts, *best);
  const auto averaged = average_checkpoints(ckpts);
  write_checkpoint_file(output, averaged);
  json j;
  j["output"] = output;
  j["averaged_of"] = ckpts.size();
  j["updates"] = averaged.updates;
  return j;
}

struct TranslateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string output;
  std::vector<std::string> inputs;
  std::string fps = "25";
  std::string components;
  DecodeConfig decode;
};

json cmd_translate(const TranslateArgs& a) {
  const auto ckpt = read_checkpoint_file(a.checkpoint);
  const auto vocab = read_vocab(a.vocab);
  if (ckpt.vocab_hash != vocab.hash())
    throw Error(ErrorCode::kVocabMismatch,
                "checkpoint vocabulary " + format_hash(ckpt.vocab_hash) +
                    " does not match " + format_hash(vocab.hash()));
  const auto target = parse_frame_rate(a.fps);
  const auto components = split_list(a.components);
  std::vector<std::string> lines;
  for (const auto& input : a.inputs) {
    for (const auto& file : list_pose_files(input)) {
      auto pose = read_pose_file(file);
      if (!same_rate(pose.fps(), target)) pose = resample(pose, ResampleSpec{target});
      lines.push_back(translate(ckpt.params, vocab, flatten(pose, components), a.decode).text);
    }
  }
  write_lines(a.output, lines);
  json j;
  j["output"] = a.output;
  j["sentences"] = lines.size();
  return j;
}

json cmd_evaluate(const std::string& hyp, const std::string& ref, const std::string& metric,
                  bool unsmoothed) {
  const auto hyps = read_lines(hyp);
  const auto refs = read_lines(ref);
  json j;
  j["sentences"] = hyps.size();
  if (metric == "bleu" || metric == "all")
    j["bleu"] = bleu_json(bleu4(hyps, refs, unsmoothed ? BleuSmoothing::kNone : BleuSmoothing::kExp));
  if (metric == "chrf" || metric == "all") j["chrf++"] = chrf_pp(hyps, refs);
  return j;
}

json cmd_stats(const std::string& corpus, std::optional<double> unique_words, double hours) {
  CorpusStats s;
  if (unique_words)
    s = corpus_stats_from_counts(hours, *unique_words);
  else if (!corpus.empty())
    s = corpus_stats(read_text_file(corpus), hours);
  else
    throw ValidationError("stats:", {"one of --corpus or --unique-words is required"});
  char rounded[32];
  std::snprintf(rounded, sizeof rounded, "%.2f", s.ratio);
  json j;
  j["hours"] = s.hours;
  j["unique_words"] = s.unique_words;
  j["ratio"] = s.ratio;
  j["ratio_2dp"] = std::string(rounded);
  return j;
}

void print_error(std::ostream& err, std::string_view code, const std::string& message,
                 const std::vector<std::string>& problems = {}) {
  json j;
  j["error"] = std::string(code);
  j["message"] = message;
  if (!problems.empty()) j["problems"] = problems;
  err << j.dump() << "\n";
}

}  // namespace

std::vector<fs::path> list_pose_files(const fs::path& path) {
  if (!fs::is_directory(path)) {
    if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no such file: " + path.string());
    return {path};
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_regular_file() && entry.path().extension() == ".pose")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

Dataset load_split(const fs::path& poses, const fs::path& text, FrameRate target_fps,
                   std::vector<std::string> components) {
  Dataset d;
  d.components = std::move(components);
  for (const auto& f : list_pose_files(poses)) {
    auto pose = read_pose_file(f);
    if (!same_rate(pose.fps(), target_fps)) pose = resample(pose, ResampleSpec{target_fps});
    d.poses.push_back(std::move(pose));
  }
  d.sentences = read_lines(text);
  if (d.poses.size() != d.sentences.size())
    throw Error(ErrorCode::kInvalidArgument,
                poses.string() + " has " + std::to_string(d.poses.size()) + " poses but " +
                    text.string() + " has " + std::to_string(d.sentences.size()) + " lines");
  return d;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pose-to-text translation toolkit", "p2tx"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Write pose files and text from a synthetic spec or JSON lines");
  c_ingest->add_option("--synthetic", ingest.synthetic, "Synthetic corpus spec (INI)");
  c_ingest->add_option("--jsonl", ingest.jsonl, "Pose JSON-lines files");
  c_ingest->add_option("--output", ingest.output, "Output directory")->required();
  c_ingest->add_option("--pairs", ingest.pairs, "Override the spec's pair count");
  c_ingest->add_option("--seed", ingest.seed, "Override the spec's seed");
  c_ingest->add_option("--fps", ingest.fps, "Frame rate of JSON-lines input");

  std::vector<std::string> validate_files;
  auto* c_validate = app.add_subcommand("validate", "Report pose-file diagnostics");
  c_validate->add_option("files", validate_files, "Pose files")->required();

  std::string rs_in, rs_out, rs_fps = "25";
  auto* c_resample = app.add_subcommand("resample", "Resample a pose file to a new frame rate");
  c_resample->add_option("--input", rs_in)->required();
  c_resample->add_option("--output", rs_out)->required();
  c_resample->add_option("--fps", rs_fps, "Target frame rate");

  std::string ap_in, ap_out;
  std::uint32_t ap_count = 4;
  double ap_sigma = 0.2;
  std::uint64_t ap_seed = 0;
  auto* c_aug = app.add_subcommand("augment-preview", "Write randomly transformed copies of a pose file");
  c_aug->add_option("--input", ap_in)->required();
  c_aug->add_option("--output-dir", ap_out)->required();
  c_aug->add_option("--count", ap_count);
  c_aug->add_option("--sigma", ap_sigma);
  c_aug->add_option("--seed", ap_seed);

  std::size_t tv_size = 0;
  std::vector<std::string> tv_inputs;
  std::string tv_output;
  auto* c_vocab = app.add_subcommand("train-vocab", "Train a BPE vocabulary");
  c_vocab->add_option("--size", tv_size)->required();
  c_vocab->add_option("--input", tv_inputs)->required();
  c_vocab->add_option("--output", tv_output)->required();

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "Train a model from a run config");
  c_train->add_option("--config", train_args.config)->required();
  c_train->add_option("--set", train_args.overrides, "section.key=value override");
  c_train->add_option("--run-dir", train_args.run_dir);
  c_train->add_option("--max-epochs", train_args.max_epochs);
  c_train->add_option("--seed", train_args.seed);

  std::vector<std::string> avg_inputs;
  std::string avg_output;
  std::optional<std::size_t> avg_best;
  auto* c_avg = app.add_subcommand("average", "Average checkpoint weights");
  c_avg->add_option("checkpoints", avg_inputs)->required();
  c_avg->add_option("--output", avg_output)->required();
  c_avg->add_option("--best", avg_best, "Average only the n best-scoring inputs");

  TranslateArgs tr;
  auto* c_tr = app.add_subcommand("translate", "Decode pose files to text");
  c_tr->add_option("inputs", tr.inputs, "Pose files or directories")->required();
  c_tr->add_option("--checkpoint", tr.checkpoint)->required();
  c_tr->add_option("--vocab", tr.vocab)->required();
  c_tr->add_option("--output", tr.output)->required();
  c_tr->add_option("--fps", tr.fps);
  c_tr->add_option("--components", tr.components, "Comma-separated component names");
  c_tr->add_option("--beam", tr.decode.beam_size);
  c_tr->add_option("--max-length", tr.decode.max_length);
  c_tr->add_option("--alpha", tr.decode.alpha);
  c_tr->add_option("--repetition-penalty", tr.decode.repetition_penalty);

  std::string ev_hyp, ev_ref, ev_metric = "bleu";
  bool ev_unsmoothed = false;
  auto* c_eval = app.add_subcommand("evaluate", "Score hypotheses against references");
  c_eval->add_option("--hyp", ev_hyp)->required();
  c_eval->add_option("--ref", ev_ref)->required();
  c_eval->add_option("--metric", ev_metric)->check(CLI::IsMember({"bleu", "chrf", "all"}));
  c_eval->add_flag("--unsmoothed", ev_unsmoothed, "Strict BLEU without smoothing");

  std::string st_corpus;
  std::optional<double> st_unique;
  double st_hours = 0.0;
  auto* c_stats = app.add_subcommand("stats", "Duration per thousand unique words");
  c_stats->add_option("--corpus", st_corpus);
  c_stats->add_option("--unique-words", st_unique);
  c_stats->add_option("--hours", st_hours)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    print_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    json report;
    if (c_ingest->parsed()) report = cmd_ingest(ingest);
    else if (c_validate->parsed()) return cmd_validate(validate_files, out);
    else if (c_resample->parsed()) report = cmd_resample(rs_in, rs_out, rs_fps);
    else if (c_aug->parsed()) report = cmd_augment_preview(ap_in, ap_out, ap_count, ap_sigma, ap_seed);
    else if (c_vocab->parsed()) report = cmd_train_vocab(tv_size, tv_inputs, tv_output);
    else if (c_train->parsed()) report = cmd_train(train_args, err);
    else if (c_avg->parsed()) report = cmd_average(avg_inputs, avg_output, avg_best);
    else if (c_tr->parsed()) report = cmd_translate(tr);
    else if (c_eval->parsed()) report = cmd_evaluate(ev_hyp, ev_ref, ev_metric, ev_unsmoothed);
    else if (c_stats->parsed()) report = cmd_stats(st_corpus, st_unique, st_hours);
    out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    print_error(err, "config_error", e.what(), e.problems());
    return kExitUsage;
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error(err, "internal_error", e.what());
    return kExitFailure;
  }
}

}  // namespace p2tx
