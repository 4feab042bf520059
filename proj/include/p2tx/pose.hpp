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

// Pose sequences: storage, the binary pose file format, validation, and
// flattening into per-frame feature rows.
//
// Binary layout (all integers little-endian):
//
//   "P2TX"            4 bytes magic
//   version           u16 (currently 1)
//   C                 u16, coordinates per keypoint (2 or 3)
//   fps numerator     u32
//   fps denominator   u32
//   T                 u32, frames
//   K                 u32, keypoints
//   component count   u16
//   per component:    u16 name length, UTF-8 name, u32 start, u32 end
//   T*K*C coordinates f32, frame-major, then keypoint, then coordinate
//   T*K confidences   f32, frame-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace p2tx {

struct FrameRate {
  std::uint32_t numerator = 25;
  std::uint32_t denominator = 1;

  double value() const {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  bool valid() const { return numerator > 0 && denominator > 0; }
  bool operator==(const FrameRate&) const = default;
};

// Compares rates as rationals, so 50/2 == 25/1.
bool same_rate(FrameRate a, FrameRate b);

// Parses "25", "30000/1001" or "29.97".
FrameRate parse_frame_rate(std::string_view text);

// A named group of keypoints occupying [start, end).
struct ComponentRange {
  std::string name;
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  std::uint32_t size() const { return end - start; }
  bool operator==(const ComponentRange&) const = default;
};

inline constexpr std::uint16_t kPoseFormatVersion = 1;

class PoseSequence {
 public:
  // Coordinates start at zero and confidences at one. Throws kInvalidArgument
  // unless T >= 1, K >= 1, C in {2, 3}, fps > 0 and the components are
  // disjoint and cover [0, K) in ascending order.
  PoseSequence(FrameRate fps, std::uint32_t frames, std::uint32_t keypoints,
               std::uint32_t dims, std::vector<ComponentRange> components);

  // One component named "body" spanning every keypoint.
  PoseSequence(FrameRate fps, std::uint32_t frames, std::uint32_t keypoints,
               std::uint32_t dims);

  FrameRate fps() const { return fps_; }
  std::uint32_t frames() const { return frames_; }
  std::uint32_t keypoints() const { return keypoints_; }
  std::uint32_t dims() const { return dims_; }
  const std::vector<ComponentRange>& components() const { return components_; }

  float coord(std::uint32_t t, std::uint32_t k, std::uint32_t c) const {
    return coords_[index(t, k, c)];
  }
  float& coord(std::uint32_t t, std::uint32_t k, std::uint32_t c) {
    return coords_[index(t, k, c)];
  }
  float confidence(std::uint32_t t, std::uint32_t k) const {
    return confidence_[std::size_t{t} * keypoints_ + k];
  }
  float& confidence(std::uint32_t t, std::uint32_t k) {
    return confidence_[std::size_t{t} * keypoints_ + k];
  }

  std::span<const float> coords() const { return coords_; }
  std::span<float> coords() { return coords_; }
  std::span<const float> confidences() const { return confidence_; }
  std::span<float> confidences() { return confidence_; }

  const ComponentRange* find_component(std::string_view name) const;

  // Bit-level equality of every field (so -0.0 != 0.0 and NaN == same NaN).
  friend bool operator==(const PoseSequence& a, const PoseSequence& b);

 private:
  std::size_t index(std::uint32_t t, std::uint32_t k, std::uint32_t c) const {
    return (std::size_t{t} * keypoints_ + k) * dims_ + c;
  }

  FrameRate fps_;
  std::uint32_t frames_;
  std::uint32_t keypoints_;
  std::uint32_t dims_;
  std::vector<ComponentRange> components_;
  std::vector<float> coords_;
  std::vector<float> confidence_;
};

// ---- serialization --------------------------------------------------------

// Parses the binary format. Does not enforce the [0,1] range; see validate().
// Errors: kFormat (bad magic/version/header), kTruncated (short payload),
// kCorrupt (non-finite value; message names frame and keypoint).
PoseSequence load_pose(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> save_pose(const PoseSequence& pose);

PoseSequence read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const PoseSequence& pose);

// JSON-lines interchange from upstream estimator dumps. An optional first line
// {"fps": 25, "components": [{"name": "body", "count": 33}, ...]} describes
// the layout; every other line is {"keypoints": [[x,y(,z)], ...],
// "confidence": [...]}. Known component names are reordered to the canonical
// body, left-hand, right-hand order.
PoseSequence read_pose_jsonl(std::string_view text,
                             FrameRate default_fps = FrameRate{25, 1});

// Canonical rank of a component name: body 0, left-hand 1, right-hand 2,
// anything else 3.
int canonical_component_rank(std::string_view name);

// ---- validation -----------------------------------------------------------

enum class DiagnosticCode {
  kCoordinateOutOfRange,
  kInvalidConfidence,
  kNonFiniteCoordinate,
  kNonFiniteConfidence,
};

enum class Severity { kWarning, kError };

struct Diagnostic {
  DiagnosticCode code;
  Severity severity;
  std::uint32_t frame = 0;
  std::uint32_t keypoint = 0;
  std::optional<std::uint32_t> coordinate;
  std::string message;
};

std::string_view to_string(DiagnosticCode code);
std::string_view to_string(Severity severity);

// Empty iff every invariant holds, including the [0,1] range for keypoints
// with confidence > 0.
std::vector<Diagnostic> validate(const PoseSequence& pose);

// ---- features -------------------------------------------------------------

// T x D row-major feature matrix.
struct FeatureSequence {
  FrameRate fps;
  std::uint32_t frames = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> frame_mask;  // 1 = real frame, 0 = padding

  std::span<const float> row(std::uint32_t t) const {
    return std::span<const float>(values).subspan(std::size_t{t} * dim, dim);
  }
  bool operator==(const FeatureSequence&) const = default;
};

// Concatenates the selected components, in selection order, then keypoint
// order, then coordinate order. An empty selection means every component in
// stored order. Keypoints with confidence 0 are written as `fill`.
// Throws kUnknownComponent for names not in the pose.
FeatureSequence flatten(const PoseSequence& pose,
                        std::span<const std::string> selection = {},
                        float fill = 0.0f);

// Feature width flatten() would produce; depends only on layout, not values.
std::uint32_t feature_dim(const PoseSequence& pose,
                          std::span<const std::string> selection = {});

}  // namespace p2tx
