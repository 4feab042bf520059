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

#pragma once

#include <cstdint>

#include "p2tx/pose.hpp"
#include "p2tx/rng.hpp"

namespace p2tx {

struct AugmentationParams {
  double rotation_angle = 0.0;  // radians
  double shear_factor = 0.0;
  double scale_delta = 0.0;     // points scale by (1 + scale_delta)
  bool operator==(const AugmentationParams&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct AugmentationPolicy {
  double sigma = 0.2;
  Point2 center{0.5, 0.5};
  std::uint64_t seed = 0;
  bool rotate = true;
  bool shear = true;
  bool scale = true;
};

// Draws rotation, shear and scale delta (in that order) from N(0, sigma^2).
// All three normals are always drawn so that disabling a transform does not
// shift the stream; disabled fields are then zeroed.
AugmentationParams sample_params(const AugmentationPolicy& policy, Rng& rng);

// Maps every keypoint's (x, y) through
//   p' = center + Scale(1 + delta) * Shear(k) * Rotate(theta) * (p - center)
// with the horizontal shear (x, y) -> (x + k*y, y). z, confidence, frame
// count and fps are untouched; results are not clamped.
// Throws kInvalidArgument when |1 + scale_delta| <= 1e-6 or params are not
// finite.
PoseSequence apply(const PoseSequence& pose, const AugmentationParams& params,
                   Point2 center = {0.5, 0.5});

}  // namespace p2tx
