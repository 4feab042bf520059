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

// Python bindings for the p2tx library.

#include <cstring>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "p2tx/augment.hpp"
#include "p2tx/byte_io.hpp"
#include "p2tx/checkpoint.hpp"
#include "p2tx/error.hpp"
#include "p2tx/inference.hpp"
#include "p2tx/metrics.hpp"
#include "p2tx/model.hpp"
#include "p2tx/pose.hpp"
#include "p2tx/resample.hpp"
#include "p2tx/synthetic.hpp"
#include "p2tx/tokenizer.hpp"

namespace py = pybind11;
using namespace p2tx;

namespace {

py::array_t<float> coords_array(const PoseSequence& p) {
  py::array_t<float> out({p.frames(), p.keypoints(), p.dims()});
  std::memcpy(out.mutable_data(), p.coords().data(), p.coords().size_bytes());
  return out;
}

py::array_t<float> confidence_array(const PoseSequence& p) {
  py::array_t<float> out({p.frames(), p.keypoints()});
  std::memcpy(out.mutable_data(), p.confidences().data(), p.confidences().size_bytes());
  return out;
}

PoseSequence pose_from_arrays(
    py::array_t<float, py::array::c_style | py::array::forcecast> coords,
    std::optional<py::array_t<float, py::array::c_style | py::array::forcecast>> confidence,
    double fps) {
  if (coords.ndim() != 3) throw Error(ErrorCode::kInvalidArgument, "coords must be (T, K, C)");
  const auto t = static_cast<std::uint32_t>(coords.shape(0));
  const auto k = static_cast<std::uint32_t>(coords.shape(1));
  const auto c = static_cast<std::uint32_t>(coords.shape(2));
  PoseSequence p(parse_frame_rate(std::to_string(fps)), t, k, c);
  std::memcpy(p.coords().data(), coords.data(), p.coords().size_bytes());
  if (confidence) {
    if (confidence->ndim() != 2 || confidence->shape(0) != t || confidence->shape(1) != k)
      throw Error(ErrorCode::kDimensionMismatch, "confidence must be (T, K)");
    std::memcpy(p.confidences().data(), confidence->data(), p.confidences().size_bytes());
  }
  return p;
}

py::dict bleu_dict(const BleuReport& r) {
  py::dict d;
  d["bleu"] = r.bleu;
  d["precisions"] = r.precisions;
  d["matches"] = r.matches;
  d["totals"] = r.totals;
  d["brevity_penalty"] = r.brevity_penalty;
  d["hyp_len"] = r.hypothesis_length;
  d["ref_len"] = r.reference_length;
  return d;
}

}  // namespace

PYBIND11_MODULE(_p2tx, m) {
  m.doc() = "Pose-to-text translation toolkit";

  // Raised for every library failure; `code` holds the stable error name.
  static PyObject* error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  py::class_<PoseSequence>(m, "PoseSequence")
      .def(py::init(&pose_from_arrays), py::arg("coords"), py::arg("confidence") = py::none(),
           py::arg("fps") = 25.0)
      .def_property_readonly("frames", &PoseSequence::frames)
      .def_property_readonly("keypoints", &PoseSequence::keypoints)
      .def_property_readonly("dims", &PoseSequence::dims)
      .def_property_readonly("fps", [](const PoseSequence& p) { return p.fps().value(); })
      .def_property_readonly("components",
                             [](const PoseSequence& p) {
                               std::vector<std::tuple<std::string, std::uint32_t, std::uint32_t>> out;
                               for (const auto& c : p.components()) out.emplace_back(c.name, c.start, c.end);
                               return out;
                             })
      .def_property_readonly("coords", &coords_array)
      .def_property_readonly("confidence", &confidence_array)
      .def("__eq__", [](const PoseSequence& a, const PoseSequence& b) { return a == b; })
      .def("__repr__", [](const PoseSequence& p) {
        return "<PoseSequence frames=" + std::to_string(p.frames()) +
               " keypoints=" + std::to_string(p.keypoints()) +
               " dims=" + std::to_string(p.dims()) + ">";
      });

  m.def("read_pose", &read_pose_file, py::arg("path"));
  m.def("write_pose", &write_pose_file, py::arg("path"), py::arg("pose"));
  m.def("resample",
        [](const PoseSequence& p, double fps) {
          return resample(p, ResampleSpec{parse_frame_rate(std::to_string(fps))});
        },
        py::arg("pose"), py::arg("fps") = 25.0);
  m.def("resampled_frame_count",
        [](std::uint32_t frames, double source, double target) {
          return resampled_frame_count(frames, parse_frame_rate(std::to_string(source)),
                                       parse_frame_rate(std::to_string(target)));
        },
        py::arg("frames"), py::arg("source_fps"), py::arg("target_fps"));
  m.def("validate", [](const PoseSequence& p) {
    py::list out;
    for (const auto& d : validate(p)) {
      py::dict item;
      item["code"] = std::string(to_string(d.code));
      item["severity"] = std::string(to_string(d.severity));
      item["frame"] = d.frame;
      item["keypoint"] = d.keypoint;
      item["message"] = d.message;
      out.append(item);
    }
    return out;
  });
  m.def("flatten",
        [](const PoseSequence& p, std::vector<std::string> components, float fill) {
          const auto f = flatten(p, components, fill);
          py::array_t<float> out({f.frames, f.dim});
          std::memcpy(out.mutable_data(), f.values.data(), f.values.size() * sizeof(float));
          return out;
        },
        py::arg("pose"), py::arg("components") = std::vector<std::string>{},
        py::arg("fill") = 0.0f);

  m.def("augment",
        [](const PoseSequence& p, double rotation, double shear, double scale) {
          return apply(p, AugmentationParams{rotation, shear, scale});
        },
        py::arg("pose"), py::arg("rotation") = 0.0, py::arg("shear") = 0.0,
        py::arg("scale") = 0.0);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("load",
                  [](const std::filesystem::path& path) {
                    return Vocabulary::parse(read_text_file(path));
                  },
                  py::arg("path"))
      .def_static("parse", [](const std::string& text) { return Vocabulary::parse(text); })
      .def("serialize", &Vocabulary::serialize)
      .def("__len__", &Vocabulary::size)
      .def("token", &Vocabulary::token)
      .def_property_readonly("tokens", &Vocabulary::tokens)
      .def_property_readonly("hash", [](const Vocabulary& v) { return format_hash(v.hash()); })
      .def("encode", [](const Vocabulary& v, const std::string& text) { return encode(v, text).ids; })
      .def("decode", [](const Vocabulary& v, std::vector<std::uint32_t> ids) {
        return decode(v, TokenSequence{std::move(ids)});
      });
  m.def("train_vocab", [](std::vector<std::string> corpora, std::size_t size) {
    return train_vocab(corpora, size);
  }, py::arg("corpora"), py::arg("size"));

  m.def("bleu",
        [](std::vector<std::string> hyps, std::vector<std::string> refs, bool smooth) {
          return bleu_dict(bleu4(hyps, refs, smooth ? BleuSmoothing::kExp : BleuSmoothing::kNone));
        },
        py::arg("hypotheses"), py::arg("references"), py::arg("smooth") = true);
  m.def("chrf_pp",
        [](std::vector<std::string> hyps, std::vector<std::string> refs) {
          return chrf_pp(hyps, refs);
        },
        py::arg("hypotheses"), py::arg("references"));
  m.def("tokenize_international", &tokenize_international);
  m.def("corpus_stats", [](double hours, double unique_words) {
    return corpus_stats_from_counts(hours, unique_words).ratio;
  }, py::arg("hours"), py::arg("unique_words"));

  m.def("param_count",
        [](std::uint32_t layers, std::uint32_t heads, std::uint32_t ffn_dim,
           std::uint32_t embed_dim, std::uint32_t input_dim, std::uint32_t vocab_size) {
          ModelConfig c;
          c.layers = layers;
          c.heads = heads;
          c.ffn_dim = ffn_dim;
          c.embed_dim = embed_dim;
          c.input_dim = input_dim;
          c.vocab_size = vocab_size;
          return param_count(c);
        },
        py::arg("layers"), py::arg("heads"), py::arg("ffn_dim"), py::arg("embed_dim"),
        py::arg("input_dim"), py::arg("vocab_size"));

  m.def("translate",
        [](const std::filesystem::path& checkpoint, const Vocabulary& vocab,
           const PoseSequence& pose, std::uint32_t beam, std::uint32_t max_length,
           double alpha) {
          const auto ckpt = read_checkpoint_file(checkpoint);
          if (ckpt.vocab_hash != vocab.hash())
            throw Error(ErrorCode::kVocabMismatch,
                        "checkpoint vocabulary " + format_hash(ckpt.vocab_hash) +
                            " does not match " + format_hash(vocab.hash()));
          DecodeConfig dc;
          dc.beam_size = beam;
          dc.max_length = max_length;
          dc.alpha = alpha;
          const auto h = translate(ckpt.params, vocab, flatten(pose), dc);
          return py::make_tuple(h.text, h.score);
        },
        py::arg("checkpoint"), py::arg("vocab"), py::arg("pose"), py::arg("beam") = 5,
        py::arg("max_length") = 128, py::arg("alpha") = 1.0);

  m.def("synthetic_corpus",
        [](std::uint32_t pairs, std::uint64_t seed, std::uint32_t keypoints, std::uint32_t dims) {
          SynthSpec spec;
          spec.pairs = pairs;
          spec.seed = seed;
          spec.keypoints = keypoints;
          spec.dims = dims;
          auto corpus = generate(spec);
          return py::make_tuple(std::move(corpus.poses), std::move(corpus.sentences));
        },
        py::arg("pairs") = 32, py::arg("seed") = 0, py::arg("keypoints") = 8,
        py::arg("dims") = 3);
}
