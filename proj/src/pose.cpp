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

#include "p2tx/pose.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "p2tx/byte_io.hpp"
#include "p2tx/error.hpp"

namespace p2tx {
namespace {

constexpr std::string_view kMagic = "P2TX";

void check_components(const std::vector<ComponentRange>& components,
                      std::uint32_t keypoints, ErrorCode code) {
  if (components.empty())
    throw Error(code, "pose has no components");
  std::uint32_t expected_start = 0;
  for (const auto& c : components) {
    if (c.name.empty()) throw Error(code, "component with empty name");
    if (c.start != expected_start || c.end <= c.start) {
      throw Error(code, "component '" + c.name +
                            "' does not continue a disjoint cover of [0, K)");
    }
    expected_start = c.end;
  }
  if (expected_start != keypoints) {
    throw Error(code, "components cover [0, " + std::to_string(expected_start) +
                          ") but K = " + std::to_string(keypoints));
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    for (std::size_t j = i + 1; j < components.size(); ++j) {
      if (components[i].name == components[j].name)
        throw Error(code, "duplicate component name '" + components[i].name + "'");
    }
  }
}

void check_shape(FrameRate fps, std::uint32_t frames, std::uint32_t keypoints,
                 std::uint32_t dims, ErrorCode code) {
  if (!fps.valid()) throw Error(code, "frame rate must be positive");
  if (frames < 1) throw Error(code, "pose must have at least one frame");
  if (keypoints < 1) throw Error(code, "pose must have at least one keypoint");
  if (dims != 2 && dims != 3)
    throw Error(code, "coordinate dimension must be 2 or 3, got " +
                          std::to_string(dims));
}

std::uint64_t gcd64(std::uint64_t a, std::uint64_t b) { return std::gcd(a, b); }

}  // namespace

bool same_rate(FrameRate a, FrameRate b) {
  return std::uint64_t{a.numerator} * b.denominator ==
         std::uint64_t{b.numerator} * a.denominator;
}

FrameRate parse_frame_rate(std::string_view text) {
  auto fail = [&] {
    return Error(ErrorCode::kInvalidArgument,
                 "invalid frame rate '" + std::string(text) + "'");
  };
  const auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    std::uint32_t num = 0, den = 0;
    auto a = text.substr(0, slash), b = text.substr(slash + 1);
    if (std::from_chars(a.data(), a.data() + a.size(), num).ec != std::errc{} ||
        std::from_chars(b.data(), b.data() + b.size(), den).ec != std::errc{})
      throw fail();
    FrameRate r{num, den};
    if (!r.valid()) throw fail();
    return r;
  }
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(std::string(text), &used);
    if (used != text.size()) throw fail();
  } catch (const std::logic_error&) {
    throw fail();
  }
  if (!(v > 0.0) || !std::isfinite(v) || v > 1e6) throw fail();
  auto num = static_cast<std::uint64_t>(std::llround(v * 1000.0));
  std::uint64_t den = 1000;
  const auto g = gcd64(num, den);
  if (num == 0) throw fail();
  return FrameRate{static_cast<std::uint32_t>(num / g),
                   static_cast<std::uint32_t>(den / g)};
}

PoseSequence::PoseSequence(FrameRate fps, std::uint32_t frames,
                           std::uint32_t keypoints, std::uint32_t dims,
                           std::vector<ComponentRange> components)
    : fps_(fps),
      frames_(frames),
      keypoints_(keypoints),
      dims_(dims),
      components_(std::move(components)) {
  check_shape(fps, frames, keypoints, dims, ErrorCode::kInvalidArgument);
  check_components(components_, keypoints, ErrorCode::kInvalidArgument);
  coords_.assign(std::size_t{frames} * keypoints * dims, 0.0f);
  confidence_.assign(std::size_t{frames} * keypoints, 1.0f);
}

PoseSequence::PoseSequence(FrameRate fps, std::uint32_t frames,
                           std::uint32_t keypoints, std::uint32_t dims)
    : PoseSequence(fps, frames, keypoints, dims,
                   {ComponentRange{"body", 0, keypoints}}) {}

const ComponentRange* PoseSequence::find_component(std::string_view name) const {
  for (const auto& c : components_)
    if (c.name == name) return &c;
  return nullptr;
}

bool operator==(const PoseSequence& a, const PoseSequence& b) {
  auto same_bits = [](std::span<const float> x, std::span<const float> y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), x.size_bytes()) == 0;
  };
  return a.fps_ == b.fps_ && a.frames_ == b.frames_ &&
         a.keypoints_ == b.keypoints_ && a.dims_ == b.dims_ &&
         a.components_ == b.components_ && same_bits(a.coords_, b.coords_) &&
         same_bits(a.confidence_, b.confidence_);
}

// ---- serialization --------------------------------------------------------

std::vector<std::uint8_t> save_pose(const PoseSequence& pose) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put(kPoseFormatVersion);
  w.put(static_cast<std::uint16_t>(pose.dims()));
  w.put(pose.fps().numerator);
  w.put(pose.fps().denominator);
  w.put(pose.frames());
  w.put(pose.keypoints());
  w.put(static_cast<std::uint16_t>(pose.components().size()));
  for (const auto& c : pose.components()) {
    w.put_string16(c.name);
    w.put(c.start);
    w.put(c.end);
  }
  for (float v : pose.coords()) w.put(v);
  for (float v : pose.confidences()) w.put(v);
  return std::move(w).take();
}

PoseSequence load_pose(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size() || r.get_bytes(kMagic.size()) != kMagic)
    throw Error(ErrorCode::kFormat, "not a pose file (bad magic)");
  // The fixed header is 22 bytes after the magic; a short one is a format
  // problem rather than a truncated payload.
  if (r.remaining() < 22) throw Error(ErrorCode::kFormat, "pose header too short");
  const auto version = r.get<std::uint16_t>();
  if (version != kPoseFormatVersion)
    throw Error(ErrorCode::kFormat,
                "unsupported pose format version " + std::to_string(version));
  const auto dims = r.get<std::uint16_t>();
  FrameRate fps;
  fps.numerator = r.get<std::uint32_t>();
  fps.denominator = r.get<std::uint32_t>();
  const auto frames = r.get<std::uint32_t>();
  const auto keypoints = r.get<std::uint32_t>();
  const auto ncomp = r.get<std::uint16_t>();
  check_shape(fps, frames, keypoints, dims, ErrorCode::kFormat);

  std::vector<ComponentRange> components;
  try {
    for (std::uint16_t i = 0; i < ncomp; ++i) {
      ComponentRange c;
      c.name = r.get_string16();
      c.start = r.get<std::uint32_t>();
      c.end = r.get<std::uint32_t>();
      components.push_back(std::move(c));
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("component table: ") + e.what());
  }
  check_components(components, keypoints, ErrorCode::kFormat);

  const std::size_t ncoords = std::size_t{frames} * keypoints * dims;
  const std::size_t nconf = std::size_t{frames} * keypoints;
  const std::size_t payload = (ncoords + nconf) * sizeof(float);
  if (r.remaining() < payload) {
    throw Error(ErrorCode::kTruncated,
                "payload has " + std::to_string(r.remaining()) +
                    " bytes, header declares " + std::to_string(payload) +
                    " (T=" + std::to_string(frames) + ")");
  }
  if (r.remaining() > payload) {
    throw Error(ErrorCode::kFormat, std::to_string(r.remaining() - payload) +
                                        " trailing bytes after payload");
  }

  PoseSequence pose(fps, frames, keypoints, dims, std::move(components));
  auto coords = pose.coords();
  for (std::size_t i = 0; i < ncoords; ++i) {
    coords[i] = r.get<float>();
    if (!std::isfinite(coords[i])) {
      const auto per_frame = std::size_t{keypoints} * dims;
      throw Error(ErrorCode::kCorrupt,
                  "non-finite coordinate at frame " +
                      std::to_string(i / per_frame) + ", keypoint " +
                      std::to_string((i % per_frame) / dims));
    }
  }
  auto conf = pose.confidences();
  for (std::size_t i = 0; i < nconf; ++i) {
    conf[i] = r.get<float>();
    if (!std::isfinite(conf[i])) {
      throw Error(ErrorCode::kCorrupt,
                  "non-finite confidence at frame " + std::to_string(i / keypoints) +
                      ", keypoint " + std::to_string(i % keypoints));
    }
  }
  return pose;
}

PoseSequence read_pose_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return load_pose(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_pose_file(const std::filesystem::path& path, const PoseSequence& pose) {
  write_file_bytes(path, save_pose(pose));
}

int canonical_component_rank(std::string_view name) {
  if (name == "body") return 0;
  if (name == "left-hand") return 1;
  if (name == "right-hand") return 2;
  return 3;
}

PoseSequence read_pose_jsonl(std::string_view text, FrameRate default_fps) {
  using nlohmann::json;
  FrameRate fps = default_fps;
  struct Group {
    std::string name;
    std::uint32_t count;
    std::uint32_t source_start;
  };
  std::vector<Group> groups;
  std::vector<json> frames;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kFormat,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object())
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": not an object");
    if (obj.contains("keypoints")) {
      frames.push_back(std::move(obj));
      continue;
    }
    if (!frames.empty())
      throw Error(ErrorCode::kFormat, "header line after frame data");
    if (obj.contains("fps")) {
      const auto& f = obj["fps"];
      if (f.is_array() && f.size() == 2) {
        fps = FrameRate{f[0].get<std::uint32_t>(), f[1].get<std::uint32_t>()};
      } else if (f.is_number()) {
        fps = parse_frame_rate(f.dump());
      } else {
        throw Error(ErrorCode::kFormat, "fps must be a number or [num, den]");
      }
    }
    if (obj.contains("components")) {
      std::uint32_t start = 0;
      for (const auto& c : obj["components"]) {
        Group g{c.at("name").get<std::string>(), c.at("count").get<std::uint32_t>(),
                start};
        start += g.count;
        groups.push_back(std::move(g));
      }
    }
  }
  if (frames.empty()) throw Error(ErrorCode::kFormat, "no frame lines");

  const auto& first = frames.front()["keypoints"];
  if (!first.is_array() || first.empty() || !first[0].is_array())
    throw Error(ErrorCode::kFormat, "keypoints must be an array of coordinate arrays");
  const auto keypoints = static_cast<std::uint32_t>(first.size());
  const auto dims = static_cast<std::uint32_t>(first[0].size());
  if (groups.empty()) groups.push_back({"body", keypoints, 0});

  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    return canonical_component_rank(a.name) < canonical_component_rank(b.name);
  });
  std::vector<ComponentRange> components;
  std::vector<std::uint32_t> source_of;  // target keypoint -> source keypoint
  for (const auto& g : groups) {
    const auto start = static_cast<std::uint32_t>(source_of.size());
    for (std::uint32_t i = 0; i < g.count; ++i) source_of.push_back(g.source_start + i);
    components.push_back({g.name, start, start + g.count});
  }
  if (source_of.size() != keypoints) {
    throw Error(ErrorCode::kFormat, "components declare " +
                                        std::to_string(source_of.size()) +
                                        " keypoints, frames have " +
                                        std::to_string(keypoints));
  }

  PoseSequence pose(fps, static_cast<std::uint32_t>(frames.size()), keypoints, dims,
                    std::move(components));
  for (std::uint32_t t = 0; t < pose.frames(); ++t) {
    const auto& kp = frames[t]["keypoints"];
    if (kp.size() != keypoints)
      throw Error(ErrorCode::kFormat, "frame " + std::to_string(t) +
                                          " has a different keypoint count");
    const json* conf = frames[t].contains("confidence") ? &frames[t]["confidence"] : nullptr;
    if (conf && conf->size() != keypoints)
      throw Error(ErrorCode::kFormat, "frame " + std::to_string(t) +
                                          " confidence length mismatch");
    for (std::uint32_t k = 0; k < keypoints; ++k) {
      const auto src = source_of[k];
      const auto& point = kp[src];
      if (point.size() != dims)
        throw Error(ErrorCode::kFormat, "frame " + std::to_string(t) +
                                            " keypoint " + std::to_string(src) +
                                            " has wrong dimension");
      for (std::uint32_t c = 0; c < dims; ++c) {
        const auto v = point[c].get<double>();
        if (!std::isfinite(v))
          throw Error(ErrorCode::kCorrupt, "non-finite coordinate at frame " +
                                               std::to_string(t) + ", keypoint " +
                                               std::to_string(src));
        pose.coord(t, k, c) = static_cast<float>(v);
      }
      pose.confidence(t, k) = conf ? (*conf)[src].get<float>() : 1.0f;
    }
  }
  return pose;
}

// ---- validation -----------------------------------------------------------

std::string_view to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::kCoordinateOutOfRange: return "coordinate_out_of_range";
    case DiagnosticCode::kInvalidConfidence: return "invalid_confidence";
    case DiagnosticCode::kNonFiniteCoordinate: return "non_finite_coordinate";
    case DiagnosticCode::kNonFiniteConfidence: return "non_finite_confidence";
  }
  return "unknown";
}

std::string_view to_string(Severity severity) {
  return severity == Severity::kError ? "error" : "warning";
}

std::vector<Diagnostic> validate(const PoseSequence& pose) {
  std::vector<Diagnostic> out;
  for (std::uint32_t t = 0; t < pose.frames(); ++t) {
    for (std::uint32_t k = 0; k < pose.keypoints(); ++k) {
      const float conf = pose.confidence(t, k);
      if (!std::isfinite(conf)) {
        out.push_back({DiagnosticCode::kNonFiniteConfidence, Severity::kError, t, k,
                       std::nullopt, "confidence is not finite"});
      } else if (conf < 0.0f || conf > 1.0f) {
        out.push_back({DiagnosticCode::kInvalidConfidence, Severity::kError, t, k,
                       std::nullopt,
                       "confidence " + std::to_string(conf) + " outside [0,1]"});
      }
      for (std::uint32_t c = 0; c < pose.dims(); ++c) {
        const float v = pose.coord(t, k, c);
        if (!std::isfinite(v)) {
          out.push_back({DiagnosticCode::kNonFiniteCoordinate, Severity::kError, t, k,
                         c, "coordinate is not finite"});
        } else if (conf > 0.0f && (v < 0.0f || v > 1.0f)) {
          out.push_back({DiagnosticCode::kCoordinateOutOfRange, Severity::kWarning, t,
                         k, c, "coordinate " + std::to_string(v) + " outside [0,1]"});
        }
      }
    }
  }
  return out;
}

// ---- features -------------------------------------------------------------

namespace {

std::vector<const ComponentRange*> resolve_selection(
    const PoseSequence& pose, std::span<const std::string> selection) {
  std::vector<const ComponentRange*> picked;
  if (selection.empty()) {
    for (const auto& c : pose.components()) picked.push_back(&c);
    return picked;
  }
  for (const auto& name : selection) {
    const auto* c = pose.find_component(name);
    if (!c) throw Error(ErrorCode::kUnknownComponent, "unknown component '" + name + "'");
    if (std::find(picked.begin(), picked.end(), c) != picked.end())
      throw Error(ErrorCode::kInvalidArgument, "component '" + name + "' selected twice");
    picked.push_back(c);
  }
  return picked;
}

}  // namespace

std::uint32_t feature_dim(const PoseSequence& pose,
                          std::span<const std::string> selection) {
  std::uint32_t k = 0;
  for (const auto* c : resolve_selection(pose, selection)) k += c->size();
  return k * pose.dims();
}

FeatureSequence flatten(const PoseSequence& pose, std::span<const std::string> selection,
                        float fill) {
  const auto picked = resolve_selection(pose, selection);
  FeatureSequence out;
  out.fps = pose.fps();
  out.frames = pose.frames();
  out.dim = feature_dim(pose, selection);
  out.values.reserve(std::size_t{out.frames} * out.dim);
  out.frame_mask.assign(out.frames, 1);
  for (std::uint32_t t = 0; t < pose.frames(); ++t) {
    for (const auto* comp : picked) {
      for (std::uint32_t k = comp->start; k < comp->end; ++k) {
        const bool missing = pose.confidence(t, k) == 0.0f;
        for (std::uint32_t c = 0; c < pose.dims(); ++c)
          out.values.push_back(missing ? fill : pose.coord(t, k, c));
      }
    }
  }
  return out;
}

}  // namespace p2tx
